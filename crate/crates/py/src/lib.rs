//! Python bindings: panels, the four estimators, specification and unit-root
//! tests, and the Monte Carlo harness.

use std::fs::File;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use verdoorn::estimators::estimate;
use verdoorn::panel::{derive_productivity, emit_scatter_csv, load_industry_panels, load_panel_csv, to_growth_panel};
use verdoorn::{DpdOptions, GrowthKind, LagPolicy, Method, Schema, StudyTarget, Variable};

fn err(e: verdoorn::Error) -> PyErr {
    match e {
        verdoorn::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<Method> {
    Method::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown estimator {name:?}")))
}

/// Growth-rate panel with one `(entity, period, q, p)` row per observation.
#[pyclass(frozen, skip_from_py_object, module = "verdoorn_py")]
#[derive(Clone)]
pub struct GrowthPanel {
    inner: verdoorn::GrowthPanel,
}

#[pymethods]
impl GrowthPanel {
    #[new]
    fn new(entities: Vec<String>, periods: Vec<i64>, q: Vec<f64>, p: Vec<f64>) -> PyResult<Self> {
        let n = entities.len();
        if periods.len() != n || q.len() != n || p.len() != n {
            return Err(PyValueError::new_err("entities, periods, q and p must have equal length"));
        }
        let rows = (0..n)
            .map(|i| verdoorn::GrowthRow { entity: entities[i].clone(), period: periods[i], q: q[i], p: p[i] })
            .collect();
        Ok(Self { inner: verdoorn::GrowthPanel::from_rows(rows).map_err(err)? })
    }

    /// Reads a scatter CSV (`entity,period,q,p`) as written by `to_csv`.
    #[staticmethod]
    fn read_csv(path: &str) -> PyResult<Self> {
        let schema = Schema::new("entity", "period", &["q", "p"]);
        let ds = load_panel_csv(File::open(path).map_err(|e| err(e.into()))?, &schema).map_err(err)?;
        let mut rows = Vec::new();
        for e in ds.entities() {
            for &t in ds.periods() {
                if let (Some(q), Some(p)) = (ds.value(e, t, "q"), ds.value(e, t, "p")) {
                    rows.push(verdoorn::GrowthRow { entity: e.clone(), period: t, q, p });
                }
            }
        }
        Ok(Self { inner: verdoorn::GrowthPanel::from_rows(rows).map_err(err)? })
    }

    #[getter]
    fn entities(&self) -> Vec<String> {
        self.inner.entities().to_vec()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p()
    }

    fn rows(&self) -> Vec<(String, i64, f64, f64)> {
        self.inner.rows().iter().map(|r| (r.entity.clone(), r.period, r.q, r.p)).collect()
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        emit_scatter_csv(&self.inner, &mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.usable_observations()
    }

    fn __repr__(&self) -> String {
        format!(
            "GrowthPanel(entities={}, observations={})",
            self.inner.entity_count(),
            self.inner.usable_observations()
        )
    }
}

/// Reads a long-format levels CSV and returns `[(industry, GrowthPanel)]`.
/// Without `productivity` the productivity level is output / employment.
#[pyfunction]
#[pyo3(signature = (path, entity="region", period="year", output="output", productivity=None, employment=None, industry=None, growth="log"))]
#[allow(clippy::too_many_arguments)]
fn load_levels(
    path: &str,
    entity: &str,
    period: &str,
    output: &str,
    productivity: Option<&str>,
    employment: Option<&str>,
    industry: Option<&str>,
    growth: &str,
) -> PyResult<Vec<(String, GrowthPanel)>> {
    let kind = match growth {
        "log" => GrowthKind::LogDifference,
        "relative" => GrowthKind::Relative,
        g => return Err(PyValueError::new_err(format!("unknown growth kind {g:?}"))),
    };
    let (second, internal) = match (productivity, employment) {
        (Some(p), _) => (p, verdoorn::panel::PRODUCTIVITY),
        (None, e) => (e.unwrap_or("employment"), verdoorn::panel::EMPLOYMENT),
    };
    let mut schema = Schema::new(entity, period, &[output, second]);
    if let Some(col) = industry {
        schema = schema.with_industry(col);
    }
    let file = File::open(path).map_err(|e| err(e.into()))?;
    let panels = load_industry_panels(file, &schema).map_err(err)?;
    panels
        .into_iter()
        .map(|(name, ds)| {
            let ds = ds.with_variable_names(&[verdoorn::panel::OUTPUT, internal]).map_err(err)?;
            let (ds, _) = derive_productivity(&ds).map_err(err)?;
            Ok((name, GrowthPanel { inner: to_growth_panel(&ds, kind).map_err(err)? }))
        })
        .collect()
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "verdoorn_py")]
#[derive(Clone)]
pub struct Coefficient {
    estimate: f64,
    std_error: f64,
    t_statistic: f64,
    p_value: f64,
    significant_5pct: bool,
}

impl From<&verdoorn::Coefficient> for Coefficient {
    fn from(c: &verdoorn::Coefficient) -> Self {
        Self {
            estimate: c.estimate,
            std_error: c.std_error,
            t_statistic: c.t_statistic,
            p_value: c.p_value,
            significant_5pct: c.significant_5pct,
        }
    }
}

#[pymethods]
impl Coefficient {
    fn __repr__(&self) -> String {
        format!("Coefficient(estimate={}, std_error={}, p_value={})", self.estimate, self.std_error, self.p_value)
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "verdoorn_py")]
#[derive(Clone)]
pub struct TestResult {
    name: String,
    statistic: f64,
    distribution: String,
    p_value: f64,
    null_hypothesis: String,
    significant_5pct: bool,
    flags: Vec<String>,
}

impl From<&verdoorn::TestResult> for TestResult {
    fn from(t: &verdoorn::TestResult) -> Self {
        Self {
            name: t.name.clone(),
            statistic: t.statistic,
            distribution: t.distribution.label(),
            p_value: t.p_value,
            null_hypothesis: t.null_hypothesis.clone(),
            significant_5pct: t.significant_5pct,
            flags: t.flags.clone(),
        }
    }
}

#[pymethods]
impl TestResult {
    fn __repr__(&self) -> String {
        format!("TestResult({}, statistic={}, p_value={})", self.name, self.statistic, self.p_value)
    }
}

/// Result of one estimator. The full Rust result is kept for the
/// specification tests.
#[pyclass(frozen, module = "verdoorn_py")]
pub struct Estimate {
    inner: verdoorn::EstimateResult,
}

#[pymethods]
impl Estimate {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.label()
    }

    #[getter]
    fn intercept(&self) -> Coefficient {
        (&self.inner.intercept).into()
    }

    #[getter]
    fn slope(&self) -> Coefficient {
        (&self.inner.slope).into()
    }

    #[getter]
    fn lagged_dependent(&self) -> Option<Coefficient> {
        self.inner.lagged_dependent.as_ref().map(Into::into)
    }

    #[getter]
    fn model_test(&self) -> TestResult {
        (&self.inner.model_test).into()
    }

    #[getter]
    fn r_squared_within(&self) -> Option<f64> {
        self.inner.r_squared_within
    }

    #[getter]
    fn r_squared_overall(&self) -> Option<f64> {
        self.inner.r_squared_overall
    }

    #[getter]
    fn n_observations(&self) -> usize {
        self.inner.n_observations
    }

    #[getter]
    fn n_entities(&self) -> usize {
        self.inner.n_entities
    }

    #[getter]
    fn n_instruments(&self) -> Option<usize> {
        self.inner.n_instruments
    }

    #[getter]
    fn entity_effects(&self) -> Option<Vec<(String, f64)>> {
        self.inner.entity_effects.clone()
    }

    /// `(sigma_u2, sigma_e2, clamped)` for random effects.
    #[getter]
    fn variance_components(&self) -> Option<(f64, f64, bool)> {
        self.inner.variance_components.as_ref().map(|v| (v.sigma_u2, v.sigma_e2, v.clamped))
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Estimate({}, intercept={:.6}, slope={:.6}, n={})",
            self.inner.method.label(),
            self.inner.intercept.estimate,
            self.inner.slope.estimate,
            self.inner.n_observations
        )
    }
}

/// Fits `p = a + b·q` with `method` in {"ols", "fe", "re", "dpd"}.
#[pyfunction]
#[pyo3(name = "estimate", signature = (panel, method_name, max_instrument_lags=99, lagged_dependent=true))]
fn estimate_py(
    py: Python<'_>,
    panel: &GrowthPanel,
    method_name: &str,
    max_instrument_lags: usize,
    lagged_dependent: bool,
) -> PyResult<Estimate> {
    let m = method(method_name)?;
    let opts = DpdOptions { max_instrument_lags, lagged_dependent };
    let gp = &panel.inner;
    let inner = py.detach(|| estimate(gp, m, opts)).map_err(err)?;
    Ok(Estimate { inner })
}

#[pyfunction]
fn test_fe_vs_ols(fe: &Estimate, ols: &Estimate) -> PyResult<TestResult> {
    Ok((&verdoorn::test_fe_vs_ols(&fe.inner, &ols.inner).map_err(err)?).into())
}

#[pyfunction]
fn test_re_vs_ols(panel: &GrowthPanel, ols: &Estimate) -> PyResult<TestResult> {
    Ok((&verdoorn::test_re_vs_ols(&panel.inner, &ols.inner).map_err(err)?).into())
}

#[pyfunction]
fn test_hausman(fe: &Estimate, re: &Estimate) -> PyResult<TestResult> {
    Ok((&verdoorn::test_hausman(&fe.inner, &re.inner).map_err(err)?).into())
}

/// Correlation between the FE entity effects and b·q̄ᵢ; None when undefined.
#[pyfunction]
fn corr_effects_regressors(fe: &Estimate, panel: &GrowthPanel) -> PyResult<Option<f64>> {
    verdoorn::corr_effects_regressors(&fe.inner, &panel.inner).map_err(err)
}

fn entity_stat<'py>(py: Python<'py>, s: &verdoorn::EntityUnitRootStat) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("entity", &s.entity)?;
    d.set_item("t_statistic", s.t_statistic)?;
    d.set_item("lags_used", s.lags_used)?;
    d.set_item("p_value", s.p_value)?;
    d.set_item("clamped", s.clamped)?;
    Ok(d)
}

fn combination<'py>(py: Python<'py>, c: &verdoorn::FisherCombination) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_entities", c.n_entities)?;
    d.set_item("inverse_chi_squared", TestResult::from(&c.inverse_chi_squared))?;
    d.set_item("inverse_normal", TestResult::from(&c.inverse_normal))?;
    d.set_item("inverse_logit", TestResult::from(&c.inverse_logit))?;
    d.set_item("clamped", c.clamped)?;
    Ok(d)
}

/// Phillips–Perron Z_τ test of one series with `lags` Bartlett lags.
#[pyfunction]
#[pyo3(signature = (series, lags, entity=""))]
fn pp_test<'py>(py: Python<'py>, series: Vec<f64>, lags: usize, entity: &str) -> PyResult<Bound<'py, PyDict>> {
    entity_stat(py, &verdoorn::pp_test_entity(entity, &series, lags).map_err(err)?)
}

/// Fisher-type combination (P, Z, L*) of per-entity p-values.
#[pyfunction]
fn fisher_combine<'py>(py: Python<'py>, p_values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let stats: Vec<_> = p_values
        .into_iter()
        .map(|p| verdoorn::EntityUnitRootStat {
            entity: String::new(),
            t_statistic: f64::NAN,
            lags_used: 0,
            p_value: p,
            clamped: false,
        })
        .collect();
    combination(py, &verdoorn::fisher_combine(&stats).map_err(err)?)
}

/// Per-entity PP tests on `variable` ("p" or "q") plus their combination.
#[pyfunction]
#[pyo3(signature = (panel, variable, lag_policy="escalate"))]
fn unit_root_report<'py>(
    py: Python<'py>,
    panel: &GrowthPanel,
    variable: &str,
    lag_policy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let v = match variable {
        "p" => Variable::P,
        "q" => Variable::Q,
        _ => return Err(PyValueError::new_err(format!("variable must be \"p\" or \"q\", got {variable:?}"))),
    };
    let policy =
        LagPolicy::parse(lag_policy).ok_or_else(|| PyValueError::new_err(format!("bad lag policy {lag_policy:?}")))?;
    let r = verdoorn::unit_root_report(&panel.inner, v, policy).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("variable", r.variable.label())?;
    d.set_item("lag_marker", r.lag_marker().to_string())?;
    d.set_item("entities", r.entities.iter().map(|s| entity_stat(py, s)).collect::<PyResult<Vec<_>>>()?)?;
    d.set_item("excluded", r.excluded.iter().map(|e| (e.entity.clone(), e.reason.clone())).collect::<Vec<_>>())?;
    match &r.combination {
        Some(c) => d.set_item("combination", combination(py, c)?)?,
        None => d.set_item("combination", py.None())?,
    }
    Ok(d)
}

/// Synthetic-panel design for the Monte Carlo harness.
#[pyclass(get_all, set_all, skip_from_py_object, module = "verdoorn_py")]
#[derive(Clone)]
pub struct DgpSpec {
    n_entities: usize,
    n_periods: usize,
    intercept: f64,
    slope: f64,
    entity_effect_sd: f64,
    noise_sd: f64,
    endogeneity: f64,
    ar1_rho: f64,
    unit_root: bool,
    q_mean: f64,
    q_sd: f64,
    seed: u64,
}

impl From<&DgpSpec> for verdoorn::DgpSpec {
    fn from(s: &DgpSpec) -> Self {
        Self {
            n_entities: s.n_entities,
            n_periods: s.n_periods,
            intercept: s.intercept,
            slope: s.slope,
            entity_effect_sd: s.entity_effect_sd,
            noise_sd: s.noise_sd,
            endogeneity: s.endogeneity,
            ar1_rho: s.ar1_rho,
            unit_root: s.unit_root,
            q_mean: s.q_mean,
            q_sd: s.q_sd,
            seed: s.seed,
        }
    }
}

#[pymethods]
impl DgpSpec {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let d = verdoorn::DgpSpec::default();
        let mut s = Self {
            n_entities: d.n_entities,
            n_periods: d.n_periods,
            intercept: d.intercept,
            slope: d.slope,
            entity_effect_sd: d.entity_effect_sd,
            noise_sd: d.noise_sd,
            endogeneity: d.endogeneity,
            ar1_rho: d.ar1_rho,
            unit_root: d.unit_root,
            q_mean: d.q_mean,
            q_sd: d.q_sd,
            seed: d.seed,
        };
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "n_entities" => s.n_entities = v.extract()?,
                    "n_periods" => s.n_periods = v.extract()?,
                    "intercept" => s.intercept = v.extract()?,
                    "slope" => s.slope = v.extract()?,
                    "entity_effect_sd" => s.entity_effect_sd = v.extract()?,
                    "noise_sd" => s.noise_sd = v.extract()?,
                    "endogeneity" => s.endogeneity = v.extract()?,
                    "ar1_rho" => s.ar1_rho = v.extract()?,
                    "unit_root" => s.unit_root = v.extract()?,
                    "q_mean" => s.q_mean = v.extract()?,
                    "q_sd" => s.q_sd = v.extract()?,
                    "seed" => s.seed = v.extract()?,
                    other => return Err(PyValueError::new_err(format!("unknown DgpSpec field {other:?}"))),
                }
            }
        }
        verdoorn::DgpSpec::from(&s).validate().map_err(err)?;
        Ok(s)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", verdoorn::DgpSpec::from(self))
    }
}

#[pyfunction]
fn generate_panel(spec: &DgpSpec) -> PyResult<GrowthPanel> {
    Ok(GrowthPanel { inner: verdoorn::generate_panel(&spec.into()).map_err(err)? })
}

#[pyclass(frozen, get_all, module = "verdoorn_py")]
pub struct McSummary {
    target: String,
    replications: usize,
    failures: usize,
    mean_estimate: f64,
    bias: Option<f64>,
    rmse: Option<f64>,
    sd_estimate: f64,
    rejection_rate: f64,
    coverage_95: Option<f64>,
}

#[pymethods]
impl McSummary {
    fn __repr__(&self) -> String {
        format!(
            "McSummary({}, replications={}, mean_estimate={}, rejection_rate={})",
            self.target, self.replications, self.mean_estimate, self.rejection_rate
        )
    }
}

/// Runs `replications` draws for `target` (an estimator such as "fe" or a
/// test such as "hausman") and summarizes them.
#[pyfunction]
#[pyo3(signature = (spec, target, replications=1000, max_instrument_lags=99, lagged_dependent=true))]
fn run_study(
    py: Python<'_>,
    spec: &DgpSpec,
    target: &str,
    replications: usize,
    max_instrument_lags: usize,
    lagged_dependent: bool,
) -> PyResult<McSummary> {
    let t = StudyTarget::parse(target).ok_or_else(|| PyValueError::new_err(format!("unknown target {target:?}")))?;
    let spec = verdoorn::DgpSpec::from(spec);
    let dpd = DpdOptions { max_instrument_lags, lagged_dependent };
    let s = py
        .detach(|| verdoorn::montecarlo::run_study_with(&spec, t, replications, dpd))
        .map_err(err)?;
    Ok(McSummary {
        target: s.target,
        replications: s.replications,
        failures: s.failures,
        mean_estimate: s.mean_estimate,
        bias: s.bias,
        rmse: s.rmse,
        sd_estimate: s.sd_estimate,
        rejection_rate: s.rejection_rate,
        coverage_95: s.coverage_95,
    })
}

#[pymodule]
fn verdoorn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<GrowthPanel>()?;
    m.add_class::<Coefficient>()?;
    m.add_class::<TestResult>()?;
    m.add_class::<Estimate>()?;
    m.add_class::<DgpSpec>()?;
    m.add_class::<McSummary>()?;
    m.add_function(wrap_pyfunction!(load_levels, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_py, m)?)?;
    m.add_function(wrap_pyfunction!(test_fe_vs_ols, m)?)?;
    m.add_function(wrap_pyfunction!(test_re_vs_ols, m)?)?;
    m.add_function(wrap_pyfunction!(test_hausman, m)?)?;
    m.add_function(wrap_pyfunction!(corr_effects_regressors, m)?)?;
    m.add_function(wrap_pyfunction!(pp_test, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_combine, m)?)?;
    m.add_function(wrap_pyfunction!(unit_root_report, m)?)?;
    m.add_function(wrap_pyfunction!(generate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
