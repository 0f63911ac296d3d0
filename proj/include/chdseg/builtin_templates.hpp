#pragma once

// Template library for the four phantom variants (same content as
// data/templates.json).

namespace chdseg {

inline constexpr const char* kBuiltinTemplatesJson = R"json(
{
  "templates": [
    {
      "variant": "Normal",
      "nodes": [
        {"id": 0, "kind": "ChamberPort", "chamber": "LV"},
        {"id": 1, "kind": "ChamberPort", "chamber": "RV"},
        {"id": 2, "kind": "ChamberPort", "chamber": "LA"},
        {"id": 3, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 4, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 5, "kind": "Endpoint"},
        {"id": 6, "kind": "Junction"},
        {"id": 7, "kind": "Endpoint"},
        {"id": 8, "kind": "Endpoint"},
        {"id": 9, "kind": "Endpoint"},
        {"id": 10, "kind": "Endpoint"},
        {"id": 11, "kind": "Endpoint"}
      ],
      "edges": [
        {"source": 0, "target": 5, "class": "Ao", "length": 166, "length_tol": 42, "radius": 4.5, "radius_tol": 1.3},
        {"source": 1, "target": 6, "class": "PA", "length": 26, "length_tol": 6, "radius": 4.2, "radius_tol": 1.3},
        {"source": 6, "target": 7, "class": "PA", "length": 32, "length_tol": 8, "radius": 3.2, "radius_tol": 1.0},
        {"source": 6, "target": 8, "class": "PA", "length": 28, "length_tol": 7, "radius": 3.3, "radius_tol": 1.0},
        {"source": 2, "target": 9, "class": "LA", "length": 18, "length_tol": 4, "radius": 2.9, "radius_tol": 0.9},
        {"source": 3, "target": 10, "class": "RA", "length": 30, "length_tol": 8, "radius": 3.6, "radius_tol": 1.1},
        {"source": 4, "target": 11, "class": "RA", "length": 48, "length_tol": 12, "radius": 3.5, "radius_tol": 1.1}
      ],
      "weights": {"port": 10, "kind": 2, "length": 1, "radius": 1, "miss": 5, "extra": 1}
    },
    {
      "variant": "TGA",
      "nodes": [
        {"id": 0, "kind": "ChamberPort", "chamber": "RV"},
        {"id": 1, "kind": "ChamberPort", "chamber": "LV"},
        {"id": 2, "kind": "ChamberPort", "chamber": "LA"},
        {"id": 3, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 4, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 5, "kind": "Endpoint"},
        {"id": 6, "kind": "Junction"},
        {"id": 7, "kind": "Endpoint"},
        {"id": 8, "kind": "Endpoint"},
        {"id": 9, "kind": "Endpoint"},
        {"id": 10, "kind": "Endpoint"},
        {"id": 11, "kind": "Endpoint"}
      ],
      "edges": [
        {"source": 0, "target": 5, "class": "Ao", "length": 158, "length_tol": 40, "radius": 4.6, "radius_tol": 1.4},
        {"source": 1, "target": 6, "class": "PA", "length": 30, "length_tol": 8, "radius": 4.1, "radius_tol": 1.2},
        {"source": 6, "target": 7, "class": "PA", "length": 34, "length_tol": 8, "radius": 3.1, "radius_tol": 0.9},
        {"source": 6, "target": 8, "class": "PA", "length": 25, "length_tol": 6, "radius": 3.2, "radius_tol": 1.0},
        {"source": 2, "target": 9, "class": "LA", "length": 18, "length_tol": 4, "radius": 2.9, "radius_tol": 0.9},
        {"source": 3, "target": 10, "class": "RA", "length": 30, "length_tol": 8, "radius": 3.6, "radius_tol": 1.1},
        {"source": 4, "target": 11, "class": "RA", "length": 48, "length_tol": 12, "radius": 3.5, "radius_tol": 1.1}
      ],
      "weights": {"port": 10, "kind": 2, "length": 1, "radius": 1, "miss": 5, "extra": 1}
    },
    {
      "variant": "CAT",
      "nodes": [
        {"id": 0, "kind": "ChamberPort", "chamber": "LV"},
        {"id": 1, "kind": "ChamberPort", "chamber": "RV"},
        {"id": 2, "kind": "ChamberPort", "chamber": "LA"},
        {"id": 3, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 4, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 5, "kind": "Junction"},
        {"id": 6, "kind": "Junction"},
        {"id": 7, "kind": "Endpoint"},
        {"id": 8, "kind": "Endpoint"},
        {"id": 9, "kind": "Endpoint"},
        {"id": 10, "kind": "Endpoint"},
        {"id": 11, "kind": "Endpoint"}
      ],
      "edges": [
        {"source": 0, "target": 5, "class": "Ao", "length": 22, "length_tol": 6, "radius": 4.7, "radius_tol": 1.4},
        {"source": 1, "target": 5, "class": "Ao", "length": 19, "length_tol": 5, "radius": 4.7, "radius_tol": 1.4},
        {"source": 5, "target": 6, "class": "Ao", "length": 16, "length_tol": 4, "radius": 5.0, "radius_tol": 1.5},
        {"source": 6, "target": 7, "class": "Ao", "length": 120, "length_tol": 30, "radius": 4.5, "radius_tol": 1.3},
        {"source": 6, "target": 8, "class": "PA", "length": 30, "length_tol": 8, "radius": 3.7, "radius_tol": 1.1},
        {"source": 2, "target": 9, "class": "LA", "length": 18, "length_tol": 4, "radius": 2.9, "radius_tol": 0.9},
        {"source": 3, "target": 10, "class": "RA", "length": 30, "length_tol": 8, "radius": 3.6, "radius_tol": 1.1},
        {"source": 4, "target": 11, "class": "RA", "length": 48, "length_tol": 12, "radius": 3.5, "radius_tol": 1.1}
      ],
      "weights": {"port": 10, "kind": 2, "length": 1, "radius": 1, "miss": 5, "extra": 1}
    },
    {
      "variant": "PuA",
      "nodes": [
        {"id": 0, "kind": "ChamberPort", "chamber": "LV"},
        {"id": 1, "kind": "ChamberPort", "chamber": "LA"},
        {"id": 2, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 3, "kind": "ChamberPort", "chamber": "RA"},
        {"id": 4, "kind": "Junction"},
        {"id": 5, "kind": "Endpoint"},
        {"id": 6, "kind": "Endpoint"},
        {"id": 7, "kind": "Endpoint"},
        {"id": 8, "kind": "Endpoint"},
        {"id": 9, "kind": "Endpoint"}
      ],
      "edges": [
        {"source": 0, "target": 4, "class": "Ao", "length": 113, "length_tol": 28, "radius": 4.5, "radius_tol": 1.3},
        {"source": 4, "target": 5, "class": "Ao", "length": 54, "length_tol": 14, "radius": 4.5, "radius_tol": 1.3},
        {"source": 4, "target": 6, "class": "PA", "length": 29, "length_tol": 7, "radius": 2.5, "radius_tol": 0.8, "optional": true},
        {"source": 1, "target": 7, "class": "LA", "length": 18, "length_tol": 4, "radius": 2.9, "radius_tol": 0.9},
        {"source": 2, "target": 8, "class": "RA", "length": 30, "length_tol": 8, "radius": 3.6, "radius_tol": 1.1},
        {"source": 3, "target": 9, "class": "RA", "length": 48, "length_tol": 12, "radius": 3.5, "radius_tol": 1.1}
      ],
      "weights": {"port": 10, "kind": 2, "length": 1, "radius": 1, "miss": 5, "extra": 1}
    }
  ]
}
)json";

}  // namespace chdseg
