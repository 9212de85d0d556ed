"""
Django settings for the relu-forge project.

Generated by 'django-admin startproject' using Django 5.2.5.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""
import os

from dotenv import load_dotenv
from pathlib import Path

load_dotenv()


def _bool(v: str | None, default=False):
    if v is None:
        return default
    return v.lower() in {'1', 'true', 'yes', 'on'}


def _int(v: str | None, default: int) -> int:
    if v is None or not v.strip():
        return default
    return int(v)


# The project has no sessions, auth flows or HTTP surface; the key only
# satisfies Django's startup checks.
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "relu-forge-insecure-local-key")

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = _bool(os.getenv("DEBUG"), False)
ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'src.networks',
    'src.certification',
    'src.pipeline',
]

# Networks, specs and reports live in files; nothing is persisted.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    # Reports and network files must never contain NaN/Infinity tokens.
    'STRICT_JSON': True,
    'COMPACT_JSON': True,
    'UNICODE_JSON': False,
}


# --- Logging ---
# Everything goes to stderr so command output on stdout stays machine-readable.
RELU_FORGE_LOG_LEVEL = os.getenv("RELU_FORGE_LOG_LEVEL", "WARNING").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        "src": {
            "handlers": ["console"],
            "level": RELU_FORGE_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# --- Parallelism / reproducibility ---
RELU_FORGE_THREADS = _int(os.getenv("RELU_FORGE_THREADS"), os.cpu_count() or 1)
RELU_FORGE_SEED = _int(os.getenv("RELU_FORGE_SEED"), 42)

# --- Sampling certification ---
RELU_FORGE_SAMPLES = _int(os.getenv("RELU_FORGE_SAMPLES"), 100_000)   # interior points
RELU_FORGE_PAIRS = _int(os.getenv("RELU_FORGE_PAIRS"), 10_000)        # uniform + local pairs each
RELU_FORGE_LOCAL_SCALE = 1e-3      # local perturbation radius, relative to b - a
RELU_FORGE_CORNER_MAX_DIM = 16     # add all 2^d corners up to this dimension
RELU_FORGE_EXACT_ATOL = 1e-9       # absolute tolerance for "exact" claims

# --- Construction / evaluation limits ---
RELU_FORGE_EVAL_CHUNK = 2 ** 22    # floats per hidden activation block
RELU_FORGE_MAX_PARAMS = _int(os.getenv("RELU_FORGE_MAX_PARAMS"), 20_000_000)
RELU_FORGE_MAX_BLOCK_DIM = 3

# --- Interval validation of specs ---
RELU_FORGE_LIPSCHITZ_RTOL = 1e-2
RELU_FORGE_RANGE_ATOL = 1e-9
RELU_FORGE_INTERVAL_CELLS = {1: 256, 2: 48, 3: 16}   # initial cells per axis, by arity
RELU_FORGE_INTERVAL_ROUNDS = 8
RELU_FORGE_INTERVAL_MAX_CELLS = 200_000
