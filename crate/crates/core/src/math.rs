//! Float helpers routed through `libm` so the crate builds without `std` and
//! produces identical bits regardless of the host math library.

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}
