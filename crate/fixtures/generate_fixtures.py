"""Regenerate the committed 3-21G FCIDUMP fixtures and their JSON sidecars.

Requires PySCF at generation time only; the Rust crates read the committed
files and never call this script.

    python fixtures/generate_fixtures.py --out fixtures [--only LABEL]
"""
import argparse
import hashlib
import json
import math
import os

import numpy as np
from pyscf import fci, gto, mcscf, scf
from pyscf.tools import fcidump

BASIS = "3-21G"


def h4_linear(d):
    return [("H", (i * d, 0.0, 0.0)) for i in range(4)]


def h4_square(d):
    return [("H", p) for p in [(0, 0, 0), (d, 0, 0), (d, d, 0), (0, d, 0)]]


def h4_tetra(d):
    s = d / (2.0 * math.sqrt(2.0))
    verts = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    return [("H", (s * x, s * y, s * z)) for x, y, z in verts]


def h2o(r, angle=104.5):
    half = math.radians(angle) / 2.0
    return [
        ("O", (0.0, 0.0, 0.0)),
        ("H", (r * math.sin(half), 0.0, r * math.cos(half))),
        ("H", (-r * math.sin(half), 0.0, r * math.cos(half))),
    ]


FIXTURES = {
    "h4_linear_1.5": (h4_linear(1.5), None),
    "h4_linear_3.0": (h4_linear(3.0), None),
    "h4_square_1.5": (h4_square(1.5), None),
    "h4_square_3.0": (h4_square(3.0), None),
    "h4_tetra_1.5": (h4_tetra(1.5), None),
    "h4_tetra_3.0": (h4_tetra(3.0), None),
    "h2o_1.0": (h2o(1.0), (10, 8, 1)),
    "h2o_3.0": (h2o(3.0), (10, 8, 1)),
}


def run_uhf(mol, rhf_energy):
    best = None
    mf = scf.UHF(mol)
    mf.conv_tol = 1e-12
    dm_a, dm_b = mf.get_init_guess()
    # break alpha/beta symmetry with a small asymmetric perturbation
    n = dm_a.shape[0]
    rng = np.random.default_rng(7)
    pert = rng.normal(scale=0.05, size=(n, n))
    pert = pert + pert.T
    for dm in [(dm_a, dm_b), (dm_a + pert, dm_b - pert)]:
        e = mf.kernel(dm0=np.array(dm))
        for _ in range(3):
            mo, _, stable, _ = mf.stability(return_status=True)
            if stable:
                break
            dm = mf.make_rdm1(mo, mf.mo_occ)
            e = mf.kernel(dm0=dm)
        if best is None or e < best:
            best = e
    return min(best, rhf_energy)


def generate(label, out):
    atoms, cas = FIXTURES[label]
    mol = gto.M(atom=atoms, basis=BASIS, unit="Angstrom", symmetry=False, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    if not mf.converged:
        raise SystemExit(f"{label}: RHF did not converge")
    path = os.path.join(out, f"{label}.FCIDUMP")
    fcidump.from_scf(mf, path, tol=1e-14)
    e_uhf = run_uhf(mol, mf.e_tot)
    if cas is None:
        e_fci = fci.FCI(mf).kernel()[0]
        fci_kind = "fci"
    else:
        ncas, nelecas, _ = cas
        mc = mcscf.CASCI(mf, ncas, nelecas)
        e_fci = mc.kernel()[0]
        fci_kind = f"casci({nelecas},{ncas})"
    with open(path, "rb") as fh:
        checksum = hashlib.sha256(fh.read()).hexdigest()
    sidecar = {
        "label": label,
        "method": "rhf",
        "basis": BASIS,
        "geometry": [[s, *map(float, xyz)] for s, xyz in atoms],
        "n_orb": int(mol.nao_nr()),
        "n_elec": int(mol.nelectron),
        "rhf_energy": float(mf.e_tot),
        "uhf_energy": float(e_uhf),
        "fci_energy": float(e_fci),
        "fci_kind": fci_kind,
        "checksum": checksum,
    }
    with open(os.path.join(out, f"{label}.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"{label}: norb={sidecar['n_orb']} rhf={mf.e_tot:.10f} uhf={e_uhf:.10f} {fci_kind}={e_fci:.10f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.dirname(os.path.abspath(__file__)))
    ap.add_argument("--only")
    args = ap.parse_args()
    labels = [args.only] if args.only else list(FIXTURES)
    for label in labels:
        generate(label, args.out)


if __name__ == "__main__":
    main()
