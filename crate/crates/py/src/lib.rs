//! Python bindings: profiles, the federation contract, single runs and
//! campaigns.

use std::collections::BTreeMap;

use fedsim_core::config::ConfigOverrides;
use fedsim_core::contract::{EndpointInfo, FederationContract, Role, ServiceId};
use fedsim_core::domains::CompletionMode;
use fedsim_core::harness::{self, export};
use fedsim_core::{DomainId, Phase, PhaseStats, PhaseTimeline, RunSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "NetworkProfile", module = "fedsim", frozen)]
struct PyNetworkProfile {
    inner: fedsim_core::NetworkProfile,
}

#[pymethods]
impl PyNetworkProfile {
    /// Built-in profile by name (`private` or `public`).
    #[new]
    #[pyo3(signature = (name, block_period_s=None))]
    fn new(name: &str, block_period_s: Option<f64>) -> PyResult<Self> {
        let mut p = fedsim_core::NetworkProfile::builtin(name)
            .ok_or_else(|| value_err(format!("unknown profile `{name}`")))?;
        if let Some(bp) = block_period_s {
            p = p.with_block_period(bp);
        }
        p.validate().map_err(|v| value_err(v.join("; ")))?;
        Ok(PyNetworkProfile { inner: p })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn block_period_s(&self) -> f64 {
        self.inner.block_period_s
    }

    #[getter]
    fn block_jitter(&self) -> String {
        self.inner.block_jitter.to_string()
    }

    #[getter]
    fn inclusion_extra_blocks(&self) -> String {
        self.inner.inclusion_extra_blocks.to_string()
    }

    #[getter]
    fn api_latency_s(&self) -> String {
        self.inner.api_latency_s.to_string()
    }

    fn expected_inclusion_wait(&self) -> f64 {
        self.inner.expected_inclusion_wait()
    }

    fn __repr__(&self) -> String {
        format!("NetworkProfile({:?}, block_period_s={})", self.inner.name, self.inner.block_period_s)
    }
}

#[pyfunction]
fn expected_inclusion_wait(profile: &PyNetworkProfile) -> f64 {
    fedsim_core::expected_inclusion_wait(&profile.inner)
}

/// In-memory federation contract; reverted calls raise `ValueError`.
#[pyclass(name = "Contract", module = "fedsim")]
#[derive(Default)]
struct PyContract {
    inner: FederationContract,
    height: u64,
}

fn parse_role(role: &str) -> PyResult<Role> {
    match role {
        "consumer" => Ok(Role::Consumer),
        "provider" => Ok(Role::Provider),
        "both" => Ok(Role::Both),
        other => Err(value_err(format!("unknown role `{other}`"))),
    }
}

#[pymethods]
impl PyContract {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    fn register(&mut self, caller: &str, role: &str) -> PyResult<()> {
        self.inner.register(&DomainId::new(caller), parse_role(role)?).map_err(value_err)?;
        Ok(())
    }

    #[pyo3(signature = (caller, requirements=None))]
    fn announce_service(&mut self, caller: &str, requirements: Option<BTreeMap<String, String>>) -> PyResult<u64> {
        self.height += 1;
        let sid = self.inner.next_service_id();
        self.inner
            .announce_service(&DomainId::new(caller), requirements.unwrap_or_default(), self.height)
            .map_err(value_err)?;
        Ok(sid.0)
    }

    fn place_bid(&mut self, caller: &str, service_id: u64, price: u64) -> PyResult<()> {
        self.height += 1;
        self.inner
            .place_bid(&DomainId::new(caller), ServiceId(service_id), price, self.height)
            .map_err(value_err)?;
        Ok(())
    }

    /// Returns the winning provider.
    fn choose_winner(&mut self, caller: &str, service_id: u64) -> PyResult<String> {
        self.inner.choose_winner(&DomainId::new(caller), ServiceId(service_id)).map_err(value_err)?;
        let rec = self.inner.read_record(ServiceId(service_id)).map_err(value_err)?;
        Ok(rec.winner.as_ref().expect("just chosen").to_string())
    }

    #[pyo3(signature = (caller, service_id, external_ip, port, descriptor=String::new()))]
    fn confirm_deployment(
        &mut self,
        caller: &str,
        service_id: u64,
        external_ip: String,
        port: u16,
        descriptor: String,
    ) -> PyResult<()> {
        let endpoint = EndpointInfo { external_ip, port, descriptor };
        self.inner
            .confirm_deployment(&DomainId::new(caller), ServiceId(service_id), endpoint)
            .map_err(value_err)?;
        Ok(())
    }

    fn complete_federation(&mut self, caller: &str, service_id: u64) -> PyResult<()> {
        self.inner.complete_federation(&DomainId::new(caller), ServiceId(service_id)).map_err(value_err)?;
        Ok(())
    }

    fn state(&self, service_id: u64) -> PyResult<String> {
        Ok(self.inner.read_record(ServiceId(service_id)).map_err(value_err)?.state.to_string())
    }

    /// Bids as `(provider, price)` in submission order.
    fn bids(&self, service_id: u64) -> PyResult<Vec<(String, u64)>> {
        let rec = self.inner.read_record(ServiceId(service_id)).map_err(value_err)?;
        Ok(rec.bids.iter().map(|b| (b.provider.to_string(), b.price)).collect())
    }
}

fn timeline_dict<'py>(py: Python<'py>, t: &PhaseTimeline) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("run_id", t.run_id)?;
    d.set_item("profile", &t.profile_name)?;
    d.set_item("block_period_s", t.block_period_s)?;
    d.set_item("seed", t.seed)?;
    d.set_item("failed", t.failed)?;
    d.set_item("failure", t.failure.clone())?;
    let milestones = PyDict::new(py);
    for (p, at) in &t.milestones {
        milestones.set_item(p.name(), at.as_secs())?;
    }
    d.set_item("milestones", milestones)?;
    let durations = PyDict::new(py);
    for (p, dur) in fedsim_core::phase_durations(t).durations {
        durations.set_item(p.name(), dur.as_secs_f64())?;
    }
    d.set_item("durations", durations)?;
    Ok(d)
}

fn stats_dict<'py>(py: Python<'py>, s: &PhaseStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("profile", &s.profile_name)?;
    d.set_item("block_period_s", s.block_period_s)?;
    d.set_item("phase", s.phase.name())?;
    d.set_item("mean_s", s.mean_s)?;
    d.set_item("stddev_s", s.stddev_s)?;
    d.set_item("p50_s", s.p50_s)?;
    d.set_item("p95_s", s.p95_s)?;
    d.set_item("n_runs", s.n_runs)?;
    Ok(d)
}

/// One federation; returns its timeline, plus `trace` lines when traced.
#[pyfunction]
#[pyo3(signature = (profile, seed, n_providers=1, measurement_only=false, traced=false))]
fn run_federation<'py>(
    py: Python<'py>,
    profile: &PyNetworkProfile,
    seed: u64,
    n_providers: usize,
    measurement_only: bool,
    traced: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut spec = RunSpec::new(profile.inner.clone(), seed);
    spec.n_providers = n_providers;
    if measurement_only {
        spec.completion = CompletionMode::MeasurementOnly;
    }
    let out = py.detach(|| harness::run_federation(&spec, traced));
    let d = timeline_dict(py, &out.timeline)?;
    if traced {
        let lines: Vec<String> = out.trace.iter().map(ToString::to_string).collect();
        d.set_item("trace", lines)?;
    }
    Ok(d)
}

/// Runs a campaign from optional TOML text; returns `timelines`,
/// `summary` and the rendered `summary_csv`.
#[pyfunction]
#[pyo3(signature = (config_toml=None, reps=None, seed=None, measurement_only=false))]
fn run_campaign<'py>(
    py: Python<'py>,
    config_toml: Option<&str>,
    reps: Option<i64>,
    seed: Option<u64>,
    measurement_only: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let flags = ConfigOverrides { reps, seed, no_complete_tx: measurement_only, ..Default::default() };
    let config = fedsim_core::resolve(config_toml, &flags, None).map_err(value_err)?;
    let (timelines, stats) = py.detach(|| {
        harness::run_campaign(&config).map(|t| {
            let s = harness::aggregate(&t);
            (t, s)
        })
    })
    .map_err(value_err)?;
    let csv = export::summary_csv(&stats).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let d = PyDict::new(py);
    d.set_item("base_seed", config.base_seed)?;
    let t: Vec<_> = timelines.iter().map(|t| timeline_dict(py, t)).collect::<PyResult<_>>()?;
    d.set_item("timelines", t)?;
    let s: Vec<_> = stats.iter().map(|s| stats_dict(py, s)).collect::<PyResult<_>>()?;
    d.set_item("summary", s)?;
    d.set_item("summary_csv", String::from_utf8(csv).expect("ascii csv"))?;
    Ok(d)
}

#[pyfunction]
fn phases() -> Vec<&'static str> {
    Phase::ALL.iter().map(|p| p.name()).collect()
}

#[pymodule]
fn fedsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkProfile>()?;
    m.add_class::<PyContract>()?;
    m.add_function(wrap_pyfunction!(expected_inclusion_wait, m)?)?;
    m.add_function(wrap_pyfunction!(run_federation, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(phases, m)?)?;
    Ok(())
}
