import numpy as np
import pytest

from manifold_splines import (
    TriangleMesh,
    generate_cylinder_mesh,
    generate_sphere_mesh,
)


@pytest.fixture(scope="session")
def tetra_mesh():
    """Regular tetrahedron inscribed in the unit sphere; smallest closed mesh."""
    v = np.array(
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
    ) / np.sqrt(3.0)
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriangleMesh(v, t)


@pytest.fixture(scope="session")
def square_mesh():
    """Unit square split along the (0,0)-(1,1) diagonal, charted by (x, y)."""
    v = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]
    )
    t = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(v, t, chart=v[:, :2].copy())


@pytest.fixture(scope="session")
def sphere_mesh():
    return generate_sphere_mesh(30.0, 30.0)


@pytest.fixture(scope="session")
def cyl_mesh():
    return generate_cylinder_mesh(36.0, 2.5, 1.0, 10.0)


def pytest_terminal_summary(terminalreporter):
    """One verdict line per acceptance criterion at the end of the run."""
    rows = {}
    for key, verdict in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            if key != "error" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::test_criterion_", 1)[1]
            num, _, label = name.partition("_")
            # a later FAIL overrides an earlier PASS for the same criterion
            if rows.get(int(num), (None,))[0] != "FAIL":
                rows[int(num)] = (verdict, label.replace("_", " "))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for num in sorted(rows):
            verdict, label = rows[num]
            terminalreporter.write_line(f"criterion {num:>2}: {verdict} - {label}")
