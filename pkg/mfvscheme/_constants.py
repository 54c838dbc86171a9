"""
* Constants
"""
# Standard Library Imports
import os
from functools import cached_property
import logging
from pathlib import Path

# Third Party Imports
from omnitils.files import load_data_file

# Local Imports
from mfvscheme.types.config import SolverOptions

LOG_LEVELS = {
    'error': logging.ERROR,
    'warn': logging.WARNING,
    'warning': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG
}

"""
* Global Environment Class
"""


class AppEnvironment:
    _env_defaults = {
        'MFV_LOG': 'warn',
        'MFV_OUTPUT_DIR': 'out',
        'MFV_QUAD_ORDER': 2,
        'MFV_SOLVER': 'auto',
        'MFV_SOLVER_TOL': 1e-12,
        'MFV_MAX_ITER': 20000,
        'MFV_CHOLESKY_LIMIT': 200000,
        'MFV_ORDERING': 'mmd',
        'MFV_JOBS': 1
    }

    def __init__(self, **kwargs):

        # Project root holds the `config` directory
        self._path_root = Path(kwargs.get('path_root', Path(__file__).parent.parent))

        # Load environment variables
        try:
            self._env = load_data_file(
                path=self.PATH_CONFIG_ENV,
                config=kwargs.get('loader_config', None))
        except (FileNotFoundError, OSError, ValueError):
            self._env = {}
        if not isinstance(self._env, dict):
            self._env = {}

        # Set environment variables from os.environ when provided
        for n in self._env_defaults.keys():
            if self._env.get(n) not in [None, '']:
                continue
            self._env[n] = os.environ.get(n, self._env_defaults[n])

        # Apply the log level
        self.LOGR.setLevel(LOG_LEVELS[self.MFV_LOG])

    """
    * Global Objects
    """

    @cached_property
    def LOGR(self) -> logging.Logger:
        """Logger: Package logging object, writing to stderr."""
        logger = logging.getLogger('mfvscheme')
        if not logger.handlers:
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter('[%(levelname)s] %(name)s: %(message)s'))
            logger.addHandler(handler)
        return logger

    """
    * Path Properties
    """

    @property
    def CWD(self) -> Path:
        """Path: Root directory of the project."""
        return self._path_root

    @property
    def PATH_CONFIG(self) -> Path:
        """Path: Path to the `config` directory."""
        return self._path_root / 'config'

    @property
    def PATH_CONFIG_ENV(self) -> Path:
        """Path: Path to the `env.yml` file."""
        return self.PATH_CONFIG / 'env.yml'

    @property
    def PATH_OUTPUT(self) -> Path:
        """Path: Directory receiving preset reports, relative paths resolve against the working directory."""
        return Path(self.MFV_OUTPUT_DIR)

    """
    * Supported Environment Variables
    """

    @cached_property
    def MFV_LOG(self) -> str:
        """str: Log level of the `mfvscheme` logger, one of error, warn, info or debug."""
        VAR_NAME = 'MFV_LOG'
        VAL = str(self._env.get(VAR_NAME, '')).strip().lower()
        if VAL in LOG_LEVELS:
            return VAL
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_OUTPUT_DIR(self) -> str:
        """str: Directory for generated meshes, solution dumps, tables and reports."""
        VAR_NAME = 'MFV_OUTPUT_DIR'
        VAL = str(self._env.get(VAR_NAME, '')).strip()
        return VAL or self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_QUAD_ORDER(self) -> int:
        """int: Default quadrature degree of the cell averages, 1, 2 or 4."""
        VAR_NAME = 'MFV_QUAD_ORDER'
        VAL = self._env.get(VAR_NAME)
        if str(VAL).strip() in ['1', '2', '4']:
            return int(VAL)
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_SOLVER(self) -> str:
        """str: Hybrid system solver, auto, cholesky or pcg."""
        VAR_NAME = 'MFV_SOLVER'
        VAL = str(self._env.get(VAR_NAME, '')).strip().lower()
        if VAL in ['auto', 'cholesky', 'pcg']:
            return VAL
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_SOLVER_TOL(self) -> float:
        """float: Relative residual target of the conjugate gradient solver."""
        VAR_NAME = 'MFV_SOLVER_TOL'
        try:
            VAL = float(self._env.get(VAR_NAME))
        except (TypeError, ValueError):
            return self._env_defaults[VAR_NAME]
        return VAL if VAL > 0 else self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_MAX_ITER(self) -> int:
        """int: Iteration cap of the conjugate gradient solver."""
        VAR_NAME = 'MFV_MAX_ITER'
        VAL = self._env.get(VAR_NAME)
        if VAL and str(VAL).isdigit() and int(VAL) > 0:
            return int(VAL)
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_CHOLESKY_LIMIT(self) -> int:
        """int: Number of unknowns above which the `auto` solver switches to conjugate gradients."""
        VAR_NAME = 'MFV_CHOLESKY_LIMIT'
        VAL = self._env.get(VAR_NAME)
        if VAL and str(VAL).isdigit():
            return int(VAL)
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_ORDERING(self) -> str:
        """str: Fill-reducing ordering of the sparse factorization, mmd or rcm."""
        VAR_NAME = 'MFV_ORDERING'
        VAL = str(self._env.get(VAR_NAME, '')).strip().lower()
        if VAL in ['mmd', 'rcm']:
            return VAL
        return self._env_defaults[VAR_NAME]

    @cached_property
    def MFV_JOBS(self) -> int:
        """int: Worker processes used by convergence studies."""
        VAR_NAME = 'MFV_JOBS'
        VAL = self._env.get(VAR_NAME)
        if VAL and str(VAL).isdigit() and int(VAL) > 0:
            return int(VAL)
        return self._env_defaults[VAR_NAME]

    """
    * Derived Settings
    """

    @property
    def RUN_DEFAULTS(self) -> dict:
        """dict: Run settings used when neither a flag nor the run config file gives one."""
        return {
            'nu': 'fixed',
            'points': 'centroid',
            'quad_order': self.MFV_QUAD_ORDER,
            'solver': self.MFV_SOLVER,
            'tol': self.MFV_SOLVER_TOL,
            'max_iter': self.MFV_MAX_ITER,
            'ordering': self.MFV_ORDERING
        }

    @property
    def SOLVER_EXTRA(self) -> SolverOptions:
        """SolverOptions: Solver options only configurable through the environment."""
        return SolverOptions(cholesky_limit=self.MFV_CHOLESKY_LIMIT)


def initialize_environment(**kwargs) -> AppEnvironment:
    """Initializes the global state."""
    env_object = AppEnvironment(**kwargs)
    return env_object
