"""Dense audit of the small two-level instances; prints omega against kappa.

For every instance the single-space omega (sup over the partially assembled
space) equals kappa, while the max over the three split spaces can fall
below it when the images of the spaces are not a-orthogonal.
"""
import argparse

from mlbddc.oracle import audit_multispace_assumptions, dense_level_one

p = argparse.ArgumentParser()
p.add_argument("--with-3d", action="store_true", help="include the 1728-dof 3D cases (slow)")
args = p.parse_args()

cases = [(2, 12, 3, "C"), (2, 12, 3, "CE"), (2, 16, 4, "C"), (2, 16, 4, "CE")]
if args.with_3d:
    cases += [(3, 12, 3, "E"), (3, 12, 3, "CE"), (3, 12, 3, "CEF")]

print(f"{'case':>16} {'kappa':>9} {'omega':>9} {'split':>9} {'cos':>6} pass")
for dim, cells, ratio, cs in cases:
    e = audit_multispace_assumptions(dense_level_one(dim, cells, ratio, cs)).entries
    name = f"{dim}D r={ratio} {cs}"
    print(f"{name:>16} {e['kappa']:9.5f} {e['omega']:9.5f} {e['omega_split']:9.5f} "
          f"{e['image_cosine_delta_coarse']:6.3f} {e['kappa_le_omega_pass']}")
