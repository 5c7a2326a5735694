import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tsekit.config import prototype_design  # noqa: E402
from tsekit.core import Pose  # noqa: E402
from tsekit.differential import singularity_matrix  # noqa: E402
from tsekit.kinematics import NoRealSolution, inverse_kinematics, local_apexes  # noqa: E402


@pytest.fixture(scope="session")
def proto():
    return prototype_design()


def random_feasible_poses(design, n, seed=0, r_max=0.25, z_range=(0.35, 0.85), ang_deg=10.0, min_det=1e-3):
    """Seeded poses that are IK-feasible and not close to a scissor singularity."""
    rng = np.random.default_rng(seed)
    L = design.L
    out = []
    while len(out) < n:
        r = r_max * L * math.sqrt(rng.uniform())
        phi = rng.uniform(0, 2 * math.pi)
        z = rng.uniform(*z_range) * L
        ang = np.radians(rng.uniform(-ang_deg, ang_deg, 3))
        pose = Pose((r * math.cos(phi), r * math.sin(phi), z), *ang)
        try:
            sol = inverse_kinematics(design, pose)
        except NoRealSolution:
            continue
        if not sol.is_feasible():
            continue
        loc = local_apexes(design, np.array([pose.position]), pose.rotation)[0]
        q = sol.actuators
        if min(abs(singularity_matrix(design, *q.pair(i + 1), loc[i]).normalized_det) for i in range(3)) < min_det:
            continue
        out.append((pose, sol))
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
