use std::sync::Arc;

use cqsm_core::algebra::pauli_triple;
use cqsm_core::bounds::{schrodinger_ground, SchrodingerKind};
use cqsm_core::eigen::SolverOptions;
use cqsm_core::field::{Direction, MassField, ProfileConfig};
use cqsm_core::grid::{GridSpec, SpectralGrid};
use cqsm_core::sectors::{assemble_ls, profile_as_g, sector_ground, CylGrid, ZSign};

/// The `ℓ = 0`, `s = +1` reduced operator is the axisymmetric restriction of
/// `−Δ + M∂₃cos F`. Its ground energy on a finite-difference cylinder must
/// match the spectral 3D ground energy when the state is well inside the box.
#[test]
fn reduced_ground_energy_matches_three_dimensional_operator() {
    let mass = 8.0;
    let mf = MassField::new(ProfileConfig::exp_i(0.55), pauli_triple(), Direction::polar_hedgehog(1), mass).unwrap();
    let g3 = Arc::new(SpectralGrid::new(GridSpec::new(4.0, 31).unwrap()).unwrap());
    let e3 = schrodinger_ground(SchrodingerKind::SPlus, &mf, &g3, &SolverOptions::default())
        .unwrap()
        .e0;
    let g = profile_as_g(&mf);
    let cyl = CylGrid::new(4.0, 4.0, 200, 400).unwrap();
    let op = assemble_ls(&g, 0, 1, mass, cyl, ZSign::Minus).unwrap();
    let e2 = sector_ground(&op, &SolverOptions::default()).unwrap().e0;
    assert!(e3 < 0.0 && e2 < 0.0, "3D {e3}, 2D {e2}");
    assert!((e3 - e2).abs() <= 0.05 * e2.abs(), "3D {e3}, 2D {e2}");
}
