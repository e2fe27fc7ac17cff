"""
Django settings for the patch_attack project.

Hard-label survivable patch attack toolkit. Attacks run as management
commands; the only HTTP surface is the oracle stub.
"""

from pathlib import Path
from decouple import config, Csv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# =============================================================================
# SECURITY SETTINGS
# =============================================================================

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-patch-attack-local-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())


# =============================================================================
# APPLICATION DEFINITION
# =============================================================================

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # One app per toolkit module
    'core.apps.CoreConfig',
    'imaging.apps.ImagingConfig',
    'transforms.apps.TransformsConfig',
    'oracle.apps.OracleConfig',
    'survivability.apps.SurvivabilityConfig',
    'maskgen.apps.MaskgenConfig',
    'boost.apps.BoostAppConfig',
    'baseline.apps.BaselineConfig',
    'pipeline.apps.PipelineConfig',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
]

ROOT_URLCONF = 'patch_attack.urls'

TEMPLATES = []

WSGI_APPLICATION = 'patch_attack.wsgi.application'


# =============================================================================
# DATABASE CONFIGURATION (run registry only)
# =============================================================================

DATABASES = {
    'default': {
        'ENGINE': config('DB_ENGINE', default='django.db.backends.sqlite3'),
        'NAME': config('DB_NAME', default=str(BASE_DIR / 'attack_runs.sqlite3')),
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# =============================================================================
# INTERNATIONALIZATION
# =============================================================================

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# =============================================================================
# ATTACK CONFIGURATION
# =============================================================================

# Root directory for per-run result folders
PATCH_ATTACK_RESULTS_DIR = config(
    'PATCH_ATTACK_RESULTS_DIR', default=str(BASE_DIR / 'results')
)

# Master seed used when neither the config file nor --seed gives one
PATCH_ATTACK_DEFAULT_SEED = config('PATCH_ATTACK_DEFAULT_SEED', default=0, cast=int)

# Thread workers for concurrent-safe oracles (1 = serial)
PATCH_ATTACK_WORKERS = config('PATCH_ATTACK_WORKERS', default=1, cast=int)

# Transforms evaluated for every held-out survivability figure in a report
PATCH_ATTACK_HELDOUT_TRANSFORMS = config('PATCH_ATTACK_HELDOUT_TRANSFORMS', default=1000, cast=int)


# =============================================================================
# ORACLE CONFIGURATION
# =============================================================================

# Per-request timeout for external-process and HTTP oracles (seconds)
ORACLE_TIMEOUT_SECONDS = config('ORACLE_TIMEOUT_SECONDS', default=30.0, cast=float)

# Bearer token passed through to HTTP oracles (empty = no header)
ORACLE_HTTP_TOKEN = config('ORACLE_HTTP_TOKEN', default='')

# Connection-level retries for HTTP oracles
ORACLE_HTTP_RETRIES = config('ORACLE_HTTP_RETRIES', default=3, cast=int)

# Label answered by the oracle stub; -1 means "classify with the desk fixture"
ORACLE_STUB_LABEL = config('ORACLE_STUB_LABEL', default=-1, cast=int)


# =============================================================================
# FILE VALIDATION
# =============================================================================

# Max input image size: 20 MB
MAX_INPUT_IMAGE_MB = config('MAX_INPUT_IMAGE_MB', default=20, cast=int)

ALLOWED_IMAGE_EXTENSIONS = ['png']


# =============================================================================
# LOGGING CONFIGURATION
# =============================================================================

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'logs' / 'patch_attack.log',
            'formatter': 'verbose',
        },
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
        },
        'patch_attack': {
            'handlers': ['console', 'file'] if not DEBUG else ['console'],
            'level': config('PATCH_ATTACK_LOG_LEVEL', default='DEBUG' if DEBUG else 'INFO'),
        },
    },
}

# Create logs directory if it doesn't exist
(BASE_DIR / 'logs').mkdir(exist_ok=True)
