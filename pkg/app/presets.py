"""
Shipped topologies and instance data for the two reproduction experiments.

The firm/market pattern, the 20-firm communication graph and the WANET routes
were only ever published as drawings. What is transcribed here is one concrete,
documented reading of them; any of them can be replaced by a file.
All indices in this module are 1-based, as in the drawings.
"""
from __future__ import annotations
from typing import Dict, List, Tuple

# ---------- Example 1: 20 firms, 7 markets

EXAMPLE1_FIRMS = 20
EXAMPLE1_MARKETS = 7

# markets each firm supplies (firms clustered by continent, a few cross-links)
EXAMPLE1_MARKETS_OF_FIRM: Dict[int, List[int]] = {
    1: [1],       2: [1, 2],    3: [2],       4: [1, 3],
    5: [2, 3],    6: [3],       7: [3, 4],    8: [4],
    9: [4, 5],    10: [5],      11: [4, 5, 6], 12: [5],
    13: [6],      14: [6, 7],   15: [7],      16: [5, 7],
    17: [1, 6],   18: [2, 7],   19: [3, 6],   20: [7],
}

# 20-ring plus two long chords
FIG2_EDGES: List[Tuple[int, int]] = [(i, i + 1) for i in range(1, 20)] + [(1, 20), (2, 15), (6, 13)]

# ---------- Example 2: WANET with 16 links and 15 users

EXAMPLE2_LINKS = 16
EXAMPLE2_USERS = 15

# links on each user's path; R_1 = {L2, L3} is the one route given in the text
EXAMPLE2_ROUTES: Dict[int, List[int]] = {
    1: [2, 3],    2: [1, 2],    3: [3, 4],    4: [4, 5],    5: [5, 6],
    6: [6, 7],    7: [7, 8],    8: [8, 9, 16], 9: [9, 10],  10: [10, 11],
    11: [11, 12], 12: [12, 13], 13: [13, 14], 14: [14, 15], 15: [15, 16],
}

EXAMPLE2_DEFAULTS = {
    "capacity": 10.0,
    "chi": 10.0,
    "kappa": 10.0,   # not given in the text; network-wide, configurable
    "upper": 10.0,
}


def ring_edges(n: int) -> List[Tuple[int, int]]:
    return [(i, i + 1) for i in range(1, n)] + [(1, n)]


def participation_matrix() -> List[List[int]]:
    """m x N 0/1 rows for the Example 1 firm/market pattern."""
    rows = [[0] * EXAMPLE1_FIRMS for _ in range(EXAMPLE1_MARKETS)]
    for firm, markets in EXAMPLE1_MARKETS_OF_FIRM.items():
        for k in markets:
            rows[k - 1][firm - 1] = 1
    return rows


def incidence_matrix() -> List[List[int]]:
    """links x users 0/1 rows for the Example 2 routes."""
    rows = [[0] * EXAMPLE2_USERS for _ in range(EXAMPLE2_LINKS)]
    for user, links in EXAMPLE2_ROUTES.items():
        for j in links:
            rows[j - 1][user - 1] = 1
    return rows
