"""Process-level settings for the ns3l_lab experiment harness."""
import os

from dotenv import load_dotenv

load_dotenv()

APP_NAME = 'ns3l_lab'
DEBUG_MODE = os.getenv('DEBUG_MODE', 'False').lower() == 'true'

DEFAULT_OUTPUT_DIR = os.getenv('NS3L_OUTPUT_DIR', 'runs')
SHOW_PROGRESS = os.getenv('NS3L_PROGRESS', 'False').lower() == 'true'

_workers = os.getenv('NS3L_MAX_WORKERS', str(os.cpu_count() or 1))
try:
    MAX_WORKERS = int(_workers)
except ValueError:
    raise EnvironmentError(f'NS3L_MAX_WORKERS must be a positive integer, got {_workers!r}.') from None

if MAX_WORKERS < 1:
    raise EnvironmentError('NS3L_MAX_WORKERS must be a positive integer.')
