# Plain config.settings resolves to the defaults; use local or production explicitly.
from .base import *  # noqa
