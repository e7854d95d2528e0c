//! Fixtures shared by the benchmarks.

use hlc_core::lhs_sdp::{build_protocol1, SdpProblem, ShrinkSpec};
use hlc_core::measurements::{icosahedron_set, rank_one_povm, xi_a};
use hlc_core::Povm;

/// The program at `theta` with the tabulated shrinking factor for `p`.
pub fn protocol1(theta: f64, p: f64) -> SdpProblem {
    let spec = ShrinkSpec::tabulated(p).expect("tabulated p");
    let xi = xi_a(p).expect("valid p");
    build_protocol1(theta, spec.eta, &xi, &icosahedron_set(), false).expect("program builds")
}

/// A four-outcome rank-one POVM away from the icosahedron axes.
pub fn tetrahedral_povm() -> Povm {
    let s = 1.0 / 3f64.sqrt();
    rank_one_povm(&[[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]])
        .expect("tetrahedron sums to zero")
}
