use crate::error::Result;
use crate::problem::{DensityFilter, FilteredCompliance};

/// Potential energy over the design field.
pub trait Potential {
    fn n_sites(&self) -> usize;

    /// Returns the energy and writes `∂U/∂x` into `grad`.
    fn energy_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// The field that observables are measured on, for the `x` of the most
    /// recent evaluation.
    fn observed<'a>(&'a self, x: &'a [f64]) -> &'a [f64] {
        x
    }
}

impl Potential for FilteredCompliance {
    fn n_sites(&self) -> usize {
        self.spec().n_elements()
    }

    fn energy_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.evaluate(x, grad)
    }

    fn observed<'a>(&'a self, _x: &'a [f64]) -> &'a [f64] {
        self.last_physical()
    }
}

/// Zero potential. With a filter attached, observables are still reported
/// on the filtered field so the reference matches the compliance runs.
#[derive(Debug, Clone)]
pub struct FlatPotential {
    n: usize,
    filter: Option<DensityFilter>,
    filtered: Vec<f64>,
}

impl FlatPotential {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            filter: None,
            filtered: Vec::new(),
        }
    }

    pub fn with_filter(filter: DensityFilter) -> Self {
        let n = filter.len();
        Self {
            n,
            filter: Some(filter),
            filtered: vec![0.0; n],
        }
    }
}

impl Potential for FlatPotential {
    fn n_sites(&self) -> usize {
        self.n
    }

    fn energy_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if let Some(f) = &self.filter {
            f.apply(x, &mut self.filtered);
        }
        Ok(0.0)
    }

    fn observed<'a>(&'a self, x: &'a [f64]) -> &'a [f64] {
        if self.filter.is_some() {
            &self.filtered
        } else {
            x
        }
    }
}

impl<P: Potential + ?Sized> Potential for &mut P {
    fn n_sites(&self) -> usize {
        (**self).n_sites()
    }

    fn energy_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).energy_and_gradient(x, grad)
    }

    fn observed<'a>(&'a self, x: &'a [f64]) -> &'a [f64] {
        (**self).observed(x)
    }
}
