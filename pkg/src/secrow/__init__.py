"""SECrow: crowdsourced BLE tracking where only owners can locate a tag.

Three roles meet in a deterministic simulated world: the tracking device
(TD), the communication device (CD, a phone) and the tracking service (TS).
The :mod:`secrow.harness` package attacks them; :mod:`secrow.cli` drives it
all from the command line.
"""

from .core_types import Identifier, LocationFix, PrimaryCmd, derive_trackerid
from .defenses import Defenses
from .simnet import AdversaryPolicy, World

__version__ = "0.1.0"

__all__ = ["AdversaryPolicy", "Defenses", "Identifier", "LocationFix", "PrimaryCmd", "World",
           "derive_trackerid", "__version__"]
