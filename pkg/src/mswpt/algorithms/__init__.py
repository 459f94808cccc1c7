from .common import *  # noqa: F401,F403
from .baselines import *  # noqa: F401,F403
from .weighted_sum import *  # noqa: F401,F403
from .max_min import *  # noqa: F401,F403
from .hardening import *  # noqa: F401,F403
