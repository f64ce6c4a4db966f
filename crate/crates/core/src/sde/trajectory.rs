use crate::scalar::{squared_distance, Scalar};

/// A path of `X` recorded on a subset of the uniform step grid.
///
/// Trap and explosion indices refer to simulation steps, not record positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub(crate) d: usize,
    pub(crate) dt: T,
    pub(crate) steps: Vec<usize>,
    pub(crate) states: Vec<T>,
    pub(crate) trapped_at: Vec<Option<usize>>,
    pub(crate) exploded_at: Option<usize>,
}

impl<T: Scalar> Trajectory<T> {
    pub(crate) fn new(d: usize, dt: T) -> Self {
        Self {
            d,
            dt,
            steps: Vec::new(),
            states: Vec::new(),
            trapped_at: vec![None; d],
            exploded_at: None,
        }
    }

    pub(crate) fn push(&mut self, step: usize, state: &[T]) {
        self.steps.push(step);
        self.states.extend_from_slice(state);
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(self.steps[k]) * self.dt
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    pub fn last_state(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    pub fn trapped_at(&self) -> &[Option<usize>] {
        &self.trapped_at
    }

    pub fn exploded_at(&self) -> Option<usize> {
        self.exploded_at
    }

    /// Simulated steps covered by this path.
    pub fn path_steps(&self) -> usize {
        self.steps.last().copied().unwrap_or(0)
    }

    /// Position of the first record at or after simulation step `step`.
    pub fn record_at_or_after(&self, step: usize) -> Option<usize> {
        let k = self.steps.partition_point(|&s| s < step);
        (k < self.len()).then_some(k)
    }
}

/// Two solutions driven by the same Brownian increments, with the derived
/// series `ζ = |X-Y|²`, `ξ^i = |x^i-y^i|²`, `η^i = sqrt(f_i(X) x^i) - sqrt(f_i(Y) y^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun<T> {
    pub(crate) x: Trajectory<T>,
    pub(crate) y: Trajectory<T>,
    pub(crate) zeta: Vec<T>,
    pub(crate) xi: Vec<T>,
    pub(crate) eta: Vec<T>,
}

impl<T: Scalar> CoupledRun<T> {
    pub fn x(&self) -> &Trajectory<T> {
        &self.x
    }

    pub fn y(&self) -> &Trajectory<T> {
        &self.y
    }

    pub fn d(&self) -> usize {
        self.x.d
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.x.time(k)
    }

    pub fn zeta(&self) -> &[T] {
        &self.zeta
    }

    pub fn xi(&self, k: usize) -> &[T] {
        &self.xi[k * self.d()..(k + 1) * self.d()]
    }

    pub fn eta(&self, k: usize) -> &[T] {
        &self.eta[k * self.d()..(k + 1) * self.d()]
    }

    pub(crate) fn push_derived(&mut self, x: &[T], y: &[T], fx: &[T], fy: &[T]) {
        self.zeta.push(squared_distance(x, y));
        for i in 0..x.len() {
            let diff = x[i] - y[i];
            self.xi.push(diff * diff);
            self.eta.push((fx[i] * x[i]).sqrt() - (fy[i] * y[i]).sqrt());
        }
    }
}
