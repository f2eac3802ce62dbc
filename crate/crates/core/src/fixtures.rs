//! The canonical small specs every module's examples are stated against.

use crate::geometry::BundleSpec;
use crate::sode::SodeSpec;

/// n = k = m = 1, rho = 1, Gamma = 2 + 3 y1 (affine).
pub fn f1() -> BundleSpec {
    BundleSpec::parse(1, 1, 1, &[&["1"]], &[&["2 + 3*y1"]]).expect("F1 is valid")
}

/// n = k = m = 1, rho = 1, Gamma = y1^2 (not affine).
pub fn f2() -> BundleSpec {
    BundleSpec::parse(1, 1, 1, &[&["1"]], &[&["y1^2"]]).expect("F2 is valid")
}

/// One degree of freedom with force 1 + 2 v1 + 3 v1^2.
pub fn f3() -> SodeSpec {
    SodeSpec::parse(1, &["1 + 2*v1 + 3*v1^2"]).expect("F3 is valid")
}

/// n = 1, k = 2, m = 1, rho = [1, 0] (not injective), Gamma = [y1, 1].
pub fn f4() -> BundleSpec {
    BundleSpec::parse(1, 2, 1, &[&["1", "0"]], &[&["y1", "1"]]).expect("F4 is valid")
}

/// F1's anchor with vanishing connection coefficients.
pub fn flat() -> BundleSpec {
    BundleSpec::parse(1, 1, 1, &[&["1"]], &[&["0"]]).expect("flat spec is valid")
}
