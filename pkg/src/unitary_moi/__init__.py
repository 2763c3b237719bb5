"""Multiple operator integrals, derivatives and Taylor remainders for functions of unitary matrices."""

from .calculus import *  # noqa: F401,F403
from .circle_fn import *  # noqa: F401,F403
from .divided_diff import *  # noqa: F401,F403
from .harness import SuiteConfig, generate_instance, run_suite
from .matrix_core import *  # noqa: F401,F403
from .moi import *  # noqa: F401,F403
from .report import CheckReport
from .taylor import *  # noqa: F401,F403
