# pylint: disable=missing-module-docstring
# package zoneslice
from .case import list_corpus, ZoneSliceCase

__all__ = ["list_corpus", "ZoneSliceCase"]
