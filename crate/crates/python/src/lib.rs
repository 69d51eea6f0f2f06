//! Python bindings for the `privroute` library.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use privroute::field::PrimeModulus;
use privroute::laplace::{self, PolyFitOptions};
use privroute::protocol::{self, PartyInput};
use privroute::roadnet;
use privroute::sim::{self, Mode, NoiseSource, SimConfig};
use privroute::tntp::{self, TntpUnits};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn tntp_err(e: tntp::TntpError) -> PyErr {
    match e {
        tntp::TntpError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn json_to_py(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Zero-centred Laplace distribution with scale `1/epsilon`.
#[pyclass(module = "privroute_py", frozen)]
struct LaplaceParams(laplace::LaplaceParams);

#[pymethods]
impl LaplaceParams {
    #[new]
    fn new(epsilon: f64) -> PyResult<Self> {
        laplace::LaplaceParams::new(epsilon).map(Self).map_err(value_err)
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    fn pdf(&self, z: f64) -> f64 {
        self.0.pdf(z)
    }

    fn cdf(&self, z: f64) -> f64 {
        self.0.cdf(z)
    }

    fn quantile(&self, q: f64) -> f64 {
        self.0.quantile(q)
    }

    /// `n` exact draws from a ChaCha8 stream seeded with `seed`.
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| laplace::sample_laplace_exact(&self.0, &mut rng)).collect()
    }

    fn __repr__(&self) -> String {
        format!("LaplaceParams(epsilon={})", self.0.epsilon())
    }
}

/// BPR delay function `t0 (1 + alpha (x/c)^beta)`.
#[pyclass(module = "privroute_py", frozen)]
struct DelayFunction(roadnet::DelayFunction);

#[pymethods]
impl DelayFunction {
    #[new]
    #[pyo3(signature = (t0, capacity, alpha = 0.15, beta = 4.0))]
    fn new(t0: f64, capacity: f64, alpha: f64, beta: f64) -> PyResult<Self> {
        roadnet::DelayFunction::new(t0, capacity, alpha, beta).map(Self).map_err(value_err)
    }

    fn travel_time(&self, flow: f64) -> PyResult<f64> {
        self.0.travel_time(flow).map_err(value_err)
    }

    fn count_to_flow(&self, count: f64) -> PyResult<f64> {
        self.0.count_to_flow(count).map_err(value_err)
    }

    fn count_to_time(&self, count: f64) -> PyResult<f64> {
        self.0.count_to_time(count).map_err(value_err)
    }

    fn delta_critical_count(&self, delta: f64) -> f64 {
        self.0.delta_critical_count(delta)
    }

    fn __repr__(&self) -> String {
        let d = &self.0;
        format!("DelayFunction(t0={}, capacity={}, alpha={}, beta={})", d.t0, d.capacity, d.alpha, d.beta)
    }
}

/// Fitted inverse-CDF polynomial encoded over the 521-bit Mersenne field.
#[pyclass(module = "privroute_py", frozen)]
struct NoiseFit(laplace::InverseCdfPoly);

#[pymethods]
impl NoiseFit {
    #[new]
    #[pyo3(signature = (epsilon, degree = 15, uniform_bits = 16))]
    fn new(epsilon: f64, degree: usize, uniform_bits: u32) -> PyResult<Self> {
        let params = laplace::LaplaceParams::new(epsilon).map_err(value_err)?;
        let options = PolyFitOptions { degree, uniform_bits, ..Default::default() };
        laplace::fit_inverse_cdf_poly(&params, options, &PrimeModulus::mersenne521())
            .map(Self)
            .map_err(value_err)
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coefficients().to_vec()
    }

    #[getter]
    fn ks_distance(&self) -> f64 {
        self.0.ks_distance()
    }

    #[getter]
    fn max_abs_error(&self) -> f64 {
        self.0.max_abs_error()
    }

    fn evaluate(&self, w: f64) -> f64 {
        self.0.evaluate(w)
    }

    /// Runs one protocol round. `edges[i]` is the edge of party `i + 1`.
    fn run_round(&self, edges: Vec<usize>, edge_count: usize, seed: u64) -> PyResult<Vec<f64>> {
        if let Some(&e) = edges.iter().find(|&&e| e >= edge_count) {
            return Err(PyValueError::new_err(format!("edge {e} out of range for {edge_count} edges")));
        }
        let inputs: Vec<PartyInput> = edges
            .iter()
            .enumerate()
            .map(|(i, &e)| PartyInput::on_edge(i + 1, e, edge_count))
            .collect();
        protocol::run_round_seeded(&inputs, self.0.encoded(), seed, false)
            .map(|r| r.counts)
            .map_err(value_err)
    }
}

/// Road network and trip table loaded from TNTP files.
#[pyclass(module = "privroute_py", frozen)]
struct Scenario {
    net: roadnet::RoadNetwork,
    od: tntp::OdDemand,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (net, trips, time_unit_seconds = 60.0, capacity_period_seconds = 7200.0))]
    fn new(net: PathBuf, trips: PathBuf, time_unit_seconds: f64, capacity_period_seconds: f64) -> PyResult<Self> {
        let units = TntpUnits { time_unit_seconds, capacity_period_seconds };
        let net = tntp::read_net(&net, units).map_err(tntp_err)?;
        let od = tntp::read_trips(&trips).map_err(tntp_err)?;
        od.validate_against(&net).map_err(tntp_err)?;
        Ok(Scenario { net, od })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.net.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.net.edge_count()
    }

    fn fraction_critical_above(&self, delta: f64, threshold: f64) -> f64 {
        self.net.fraction_critical_above(delta, threshold)
    }

    /// Runs the private and non-private simulations and returns the
    /// comparison metrics as a dict.
    #[pyo3(signature = (epsilon = 0.1, demand_multiplier = 1.0, seed = 0, horizon = 7200.0, mpc_noise = false))]
    fn compare(
        &self,
        py: Python<'_>,
        epsilon: f64,
        demand_multiplier: f64,
        seed: u64,
        horizon: f64,
        mpc_noise: bool,
    ) -> PyResult<Py<PyAny>> {
        let config = SimConfig {
            epsilon,
            demand_multiplier,
            seed,
            horizon,
            mode: Mode::Private,
            noise: if mpc_noise { NoiseSource::Mpc } else { NoiseSource::Exact },
            ..Default::default()
        };
        let experiment = py
            .detach(|| sim::run_experiment(&self.net, &self.od, &config))
            .map_err(value_err)?;
        json_to_py(py, &experiment.metrics)
    }
}

#[pyfunction]
fn theorem1_threshold(epsilon: f64, delta: f64, p_fail: f64) -> PyResult<f64> {
    if !(epsilon > 0.0 && delta > 0.0 && p_fail > 0.0 && p_fail < 1.0) {
        return Err(PyValueError::new_err("need epsilon > 0, delta > 0 and 0 < p_fail < 1"));
    }
    Ok(roadnet::theorem1_threshold(epsilon, delta, p_fail))
}

#[pymodule]
fn privroute_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LaplaceParams>()?;
    m.add_class::<DelayFunction>()?;
    m.add_class::<NoiseFit>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(theorem1_threshold, m)?)?;
    Ok(())
}
