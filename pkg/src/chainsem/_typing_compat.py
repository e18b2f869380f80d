"""Handle typing compatibility issues."""

import sys
from typing import TypeAlias

if sys.version_info < (3, 11):
    from typing_extensions import Self
else:
    from typing import Self


__all__ = [
    "Self",
    "TypeAlias",
]
