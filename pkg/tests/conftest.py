import numpy as np

from osauction import dist as D


def random_mixed_dist(rng: np.random.Generator, max_knots: int = 5, atoms: bool = True) -> D.Dist:
    """Random valid distribution: a few atoms plus piecewise-linear mass."""
    m = int(rng.integers(2, max_knots + 1))
    xs = np.sort(rng.uniform(0.0, 3.0, size=m))
    xs += np.arange(m) * 1e-6  # keep strictly increasing
    atom_mass = rng.uniform(0.0, 1.0, size=m) * (1.0 if atoms else 0.0)
    cont_mass = rng.uniform(0.0, 1.0, size=m - 1)
    total = atom_mass.sum() + cont_mass.sum()
    if total <= 0:
        atom_mass[0] = 1.0
        total = 1.0
    atom_mass /= total
    cont_mass /= total
    fl = np.zeros(m)
    fr = np.zeros(m)
    acc = 0.0
    for i in range(m):
        fl[i] = acc
        acc += atom_mass[i]
        fr[i] = acc
        if i < m - 1:
            acc += cont_mass[i]
    return D.dist_from_arrays(xs, fl, fr)


def random_discrete_dist(rng: np.random.Generator, max_atoms: int = 4) -> D.Dist:
    m = int(rng.integers(2, max_atoms + 1))
    xs = np.sort(rng.uniform(0.1, 3.0, size=m))
    xs += np.arange(m) * 1e-6
    mass = rng.dirichlet(np.ones(m))
    mass = np.maximum(mass, 1e-3)
    mass /= mass.sum()
    return D.from_table([], atoms=list(zip(xs, mass)))
