"""Visual attribute stencils.

Each attribute is a fixed 10x10 boolean stencil painted in a fixed color.
Stencils carry no randomness of their own, so a placement is fully described
by (attribute_id, top, left). Colors stay inside [0.1, 0.9]: additive pixel
noise at the default level can never clip them to the background.
"""

from dataclasses import dataclass

import numpy as np

PATCH = 10


@dataclass(frozen=True)
class AttributeSpec:
    attribute_id: int
    name: str
    kind: str
    color: tuple


def _disk(radius, inner=0.0):
    rr, cc = np.mgrid[0:PATCH, 0:PATCH]
    d2 = (rr - 4.5) ** 2 + (cc - 4.5) ** 2
    return (d2 <= radius ** 2) & (d2 >= inner ** 2)


def _stencil_stripes_h():
    s = np.zeros((PATCH, PATCH), dtype=bool)
    s[::2, :] = True
    return s


def _stencil_stripes_v():
    return _stencil_stripes_h().T.copy()


def _stencil_checker():
    rr, cc = np.mgrid[0:PATCH, 0:PATCH]
    return (rr // 2 + cc // 2) % 2 == 0


def _stencil_disk():
    return _disk(4.6)


def _stencil_square():
    s = np.zeros((PATCH, PATCH), dtype=bool)
    s[1:9, 1:9] = True
    return s


def _stencil_triangle():
    rr, cc = np.mgrid[0:PATCH, 0:PATCH]
    return np.abs(cc - 4.5) <= (rr + 1) * 0.5


def _stencil_cross():
    s = np.zeros((PATCH, PATCH), dtype=bool)
    s[4:6, :] = True
    s[:, 4:6] = True
    return s


def _stencil_dots():
    rr, cc = np.mgrid[0:PATCH, 0:PATCH]
    return (rr % 4 < 2) & (cc % 4 < 2)


def _stencil_ring():
    return _disk(4.6, inner=2.6)


def _stencil_diagonal():
    rr, cc = np.mgrid[0:PATCH, 0:PATCH]
    return np.abs(rr - cc) <= 1


_STENCIL_FNS = {
    "stripes_h": _stencil_stripes_h,
    "stripes_v": _stencil_stripes_v,
    "checker": _stencil_checker,
    "disk": _stencil_disk,
    "square": _stencil_square,
    "triangle": _stencil_triangle,
    "cross": _stencil_cross,
    "dots": _stencil_dots,
    "ring": _stencil_ring,
    "diagonal": _stencil_diagonal,
}

ATTRIBUTE_POOL = (
    AttributeSpec(0, "horizontal stripes", "stripes_h", (0.15, 0.15, 0.15)),
    AttributeSpec(1, "vertical stripes", "stripes_v", (0.85, 0.85, 0.85)),
    AttributeSpec(2, "checkerboard", "checker", (0.70, 0.30, 0.55)),
    AttributeSpec(3, "red disk", "disk", (0.85, 0.12, 0.12)),
    AttributeSpec(4, "blue square", "square", (0.12, 0.18, 0.85)),
    AttributeSpec(5, "yellow triangle", "triangle", (0.88, 0.82, 0.12)),
    AttributeSpec(6, "green cross", "cross", (0.12, 0.78, 0.18)),
    AttributeSpec(7, "dot grid", "dots", (0.55, 0.12, 0.60)),
    AttributeSpec(8, "orange ring", "ring", (0.88, 0.52, 0.12)),
    AttributeSpec(9, "diagonal band", "diagonal", (0.12, 0.70, 0.70)),
)

_STENCILS = {a.attribute_id: _STENCIL_FNS[a.kind]() for a in ATTRIBUTE_POOL}
ATTRIBUTES_BY_ID = {a.attribute_id: a for a in ATTRIBUTE_POOL}


def stencil(attribute_id):
    return _STENCILS[attribute_id].copy()


def paint(image, attribute_id, top, left):
    """Paint the attribute into image (3, H, W) in place; return its mask."""
    attr = ATTRIBUTES_BY_ID[attribute_id]
    sten = _STENCILS[attribute_id]
    mask = np.zeros(image.shape[1:], dtype=bool)
    mask[top:top + PATCH, left:left + PATCH] = sten
    for ch in range(3):
        image[ch][mask] = attr.color[ch]
    return mask
