"""Nudge a decoder latent until a clearance constraint holds, and check handle edits."""

import numpy as np

from opkernel.artifact import fixtures
from opkernel.artifact.decoder import gamma_hip, handle_valid
from opkernel.artifact.repair import latent_repair


def main():
    dec = fixtures.clearance_decoder()
    z0 = np.array([fixtures.CLEARANCE_Z0])
    res = latent_repair(dec, z0, lam=10.0, beta=0.1)
    print(f"clearance: start z={z0[0]:.6f}, need >= {fixtures.CLEARANCE_MIN}")
    print(f"  repaired z={res.z[0]:.9f} after {res.rounds} rounds / {res.iterations} steps")
    print(f"  objective {res.trace[0]:.3e} -> {res.trace[-1]:.3e}, worst violation {res.max_violation:.1e}")

    dec = fixtures.handle_decoder()
    z = np.zeros(dec.latent_dim)
    slide = dec.handle("h.slide")
    for dx in (0.0004, 0.001, -0.001):
        print(f"slide tray {dx * 1000:+.1f} mm in x: {'valid' if handle_valid(dec, z, slide, [dx, 0.0]) else 'breaks a local constraint'}")
    rep = gamma_hip(dec, z)
    print(f"handle edits that keep their constraints: {rep.value:.3f} {dict(rep.per_handle)}")


if __name__ == "__main__":
    main()
