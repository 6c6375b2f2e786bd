//! Python bindings: world simulation, the sequence autoencoder, SSIM and the
//! experiment harness. Frames cross the boundary as flat row-major lists of
//! 32×32 floats; windows as lists of ten frames.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use episodic_explore::baselines::{window_bonus, VaeModel};
use episodic_explore::harness::{
    self, train_baseline as core_train_baseline, Condition, ExperimentConfig, ModelKind,
    TrainOptions, TrialRecord, TrialSetup,
};
use episodic_explore::memory::{
    load_weights, param_checksum, save_weights, ArchDescriptor, AutoencoderModel, Frame,
    Parameterized, SequenceWindow, FRAME_SIZE,
};
use episodic_explore::nn::AdamState;
use episodic_explore::ssim::{self, SsimConfig};
use episodic_explore::world::{self as sim, Pose, WorldSpec};
use episodic_explore::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Dimension(_) | Error::Config(_) | Error::Format(_) | Error::InsufficientData(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn frame(data: Vec<f64>) -> PyResult<Frame> {
    Frame::new(FRAME_SIZE, FRAME_SIZE, data).map_err(py_err)
}

fn window(frames: Vec<Vec<f64>>) -> PyResult<SequenceWindow> {
    let frames = frames
        .into_iter()
        .map(frame)
        .collect::<PyResult<Vec<_>>>()?;
    SequenceWindow::new(frames, 0).map_err(py_err)
}

fn unwindow(w: &SequenceWindow) -> Vec<Vec<f64>> {
    w.frames().iter().map(|f| f.data().to_vec()).collect()
}

/// SSIM of two 32×32 frames.
#[pyfunction]
fn ssim_frame(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    ssim::ssim_frame(&frame(a)?, &frame(b)?, &SsimConfig::default()).map_err(py_err)
}

/// Mean per-frame SSIM of two ten-frame windows.
#[pyfunction]
fn ssim_sequence(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    ssim::ssim_sequence(&window(a)?, &window(b)?, &SsimConfig::default()).map_err(py_err)
}

#[pyfunction]
fn two_proportion_z(success_a: usize, n_a: usize, success_b: usize, n_b: usize) -> (f64, f64) {
    let t = harness::two_proportion_z(success_a, n_a, success_b, n_b);
    (t.z, t.p_value)
}

/// The default eight-room map as text.
#[pyfunction]
fn default_map() -> String {
    WorldSpec::default_map().to_map_text()
}

/// Simulated world with a unicycle robot, camera and lidar.
#[pyclass(name = "World")]
struct PyWorld {
    inner: sim::World,
}

#[pymethods]
impl PyWorld {
    #[new]
    #[pyo3(signature = (seed=0, anomalies=true, map_text=None))]
    fn new(seed: u64, anomalies: bool, map_text: Option<&str>) -> PyResult<Self> {
        let spec = match map_text {
            Some(t) => WorldSpec::parse(t).map_err(py_err)?,
            None => WorldSpec::default_map(),
        };
        let spec = if anomalies {
            spec
        } else {
            spec.without_anomalies()
        };
        Ok(Self {
            inner: sim::World::build(spec, seed).map_err(py_err)?,
        })
    }

    fn pose(&self) -> (f64, f64, f64) {
        let p = self.inner.robot.pose;
        (p.x, p.y, p.theta)
    }

    fn set_pose(&mut self, x: f64, y: f64, theta: f64) -> PyResult<()> {
        self.inner
            .set_robot(sim::RobotState::at(Pose::new(x, y, theta)))
            .map_err(py_err)
    }

    fn step(&mut self, v: f64, omega: f64) {
        self.inner.step(v, omega, sim::DT);
    }

    fn tick(&self) -> u64 {
        self.inner.tick()
    }

    /// Camera frame from the current pose.
    fn render(&self) -> Vec<f64> {
        sim::render_camera(&self.inner, self.inner.robot.pose)
            .data()
            .to_vec()
    }

    /// Lidar ranges, beam 0 straight ahead, counter-clockwise in map terms.
    fn lidar(&self) -> Vec<f64> {
        sim::lidar_scan(&self.inner, self.inner.robot.pose).ranges
    }

    /// Room index under the robot, if any.
    fn room(&self) -> Option<usize> {
        let p = self.inner.robot.pose;
        self.inner.spec.room_at(p.x, p.y)
    }

    fn room_tags(&self) -> Vec<String> {
        self.inner
            .spec
            .room_tags
            .iter()
            .map(|t| t.to_string())
            .collect()
    }
}

/// ConvLSTM sequence autoencoder with its own Adam state.
#[pyclass(name = "Autoencoder")]
struct PyAutoencoder {
    model: AutoencoderModel,
    adam: AdamState,
}

#[pymethods]
impl PyAutoencoder {
    #[new]
    #[pyo3(signature = (seed=0, learning_rate=1e-4))]
    fn new(seed: u64, learning_rate: f64) -> PyResult<Self> {
        let model = AutoencoderModel::build(ArchDescriptor::default(), seed).map_err(py_err)?;
        let adam = model.new_optimizer(learning_rate);
        Ok(Self { model, adam })
    }

    #[staticmethod]
    #[pyo3(signature = (path, learning_rate=1e-4))]
    fn load(path: PathBuf, learning_rate: f64) -> PyResult<Self> {
        let model: AutoencoderModel = load_weights(&path).map_err(py_err)?;
        let adam = model.new_optimizer(learning_rate);
        Ok(Self { model, adam })
    }

    fn save(&mut self, path: PathBuf) -> PyResult<()> {
        self.model.quantize_f32();
        save_weights(&self.model, &path).map_err(py_err)
    }

    fn param_count(&self) -> usize {
        self.model.param_count()
    }

    /// CRC32 of the parameter bytes.
    fn checksum(&self) -> u32 {
        param_checksum(&self.model.flat_params())
    }

    fn reconstruct(&self, frames: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let r = self.model.reconstruct(&window(frames)?).map_err(py_err)?;
        Ok(unwindow(&r))
    }

    /// Sequence SSIM between a window and its reconstruction.
    fn score(&self, frames: Vec<Vec<f64>>) -> PyResult<f64> {
        let w = window(frames)?;
        let r = self.model.reconstruct(&w).map_err(py_err)?;
        ssim::ssim_sequence(&w, &r, &SsimConfig::default()).map_err(py_err)
    }

    /// One Adam step on the window; returns the pre-update loss.
    fn train_step(&mut self, frames: Vec<Vec<f64>>) -> PyResult<f64> {
        self.model
            .train_step(&window(frames)?, &mut self.adam)
            .map_err(py_err)
    }
}

/// Per-frame VAE curiosity baseline.
#[pyclass(name = "Vae")]
struct PyVae {
    model: VaeModel,
}

#[pymethods]
impl PyVae {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            model: load_weights(&path).map_err(py_err)?,
        })
    }

    /// Curiosity bonus in `[0, 1]` of a window.
    fn bonus(&self, frames: Vec<Vec<f64>>) -> PyResult<f64> {
        window_bonus(&self.model, &window(frames)?).map_err(py_err)
    }
}

fn config_from(settings: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(d) = settings {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = v.str()?.to_string();
            cfg.set(&key, &value).map_err(py_err)?;
        }
    }
    Ok(cfg)
}

fn record_dict<'py>(py: Python<'py>, r: &TrialRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trial", r.trial)?;
    d.set_item("condition", r.condition.as_str())?;
    d.set_item("ticks", r.ticks.len())?;
    d.set_item("anomaly_rooms", r.anomaly_rooms)?;
    d.set_item("non_anomaly_rooms", r.non_anomaly_rooms)?;
    let rooms: Vec<(usize, String)> = r
        .rooms_explored()
        .into_iter()
        .map(|(i, t)| (i, t.to_string()))
        .collect();
    d.set_item("rooms", rooms)?;
    let scores: Vec<(u64, f64)> = r.windows.iter().map(|w| (w.tick, w.score)).collect();
    d.set_item("scores", scores)?;
    let path: Vec<(f64, f64, f64)> = r.ticks.iter().map(|t| (t.x, t.y, t.theta)).collect();
    d.set_item("path", path)?;
    d.set_item("ledger_records", r.ledger_records)?;
    d.set_item("aborted", r.aborted.clone())?;
    Ok(d)
}

/// Runs one trial. `settings` takes the same keys as a config file.
#[pyfunction]
#[pyo3(signature = (trial=0, settings=None))]
fn run_trial<'py>(
    py: Python<'py>,
    trial: usize,
    settings: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_from(settings)?;
    let setup = TrialSetup::load(&cfg).map_err(py_err)?;
    let record = py
        .detach(|| harness::run_trial(&setup, trial))
        .map_err(py_err)?;
    record_dict(py, &record)
}

/// Runs every trial of the configured condition and returns the aggregate.
#[pyfunction]
#[pyo3(signature = (settings=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    settings: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_from(settings)?;
    let result = py
        .detach(|| harness::run_experiment(&cfg))
        .map_err(py_err)?;
    let m = &result.metrics;
    let d = PyDict::new(py);
    d.set_item("condition", m.condition.as_str())?;
    d.set_item("trials", m.trials)?;
    d.set_item("aborted", m.aborted)?;
    d.set_item("anomaly_rooms", m.anomaly_rooms)?;
    d.set_item("non_anomaly_rooms", m.non_anomaly_rooms)?;
    d.set_item("anomaly_fraction", m.anomaly_fraction())?;
    let records = result
        .records
        .iter()
        .map(|r| record_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("records", records)?;
    Ok(d)
}

/// Trains a baseline ("lstm" or "vae") and writes its weights to `out`.
#[pyfunction]
#[pyo3(signature = (out, kind="lstm", seed=42, max_steps=20_000, corpus_ticks=20_000))]
fn train_baseline<'py>(
    py: Python<'py>,
    out: PathBuf,
    kind: &str,
    seed: u64,
    max_steps: usize,
    corpus_ticks: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ModelKind = kind.parse().map_err(py_err)?;
    let opts = TrainOptions {
        seed,
        max_steps,
        corpus_ticks,
        ..TrainOptions::default()
    };
    let report = py
        .detach(|| {
            core_train_baseline(&WorldSpec::default_map(), kind, &opts, &out, &mut |_, _| {})
        })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("kind", report.kind.as_str())?;
    d.set_item("steps", report.steps)?;
    d.set_item("held_out_median", report.held_out_median)?;
    d.set_item("history", report.history.clone())?;
    d.set_item("reached_target", report.reached_target)?;
    d.set_item("bonus_scale", report.bonus_scale)?;
    Ok(d)
}

#[pymodule]
pub fn episodic_explore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWorld>()?;
    m.add_class::<PyAutoencoder>()?;
    m.add_class::<PyVae>()?;
    m.add_function(wrap_pyfunction!(ssim_frame, m)?)?;
    m.add_function(wrap_pyfunction!(ssim_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(two_proportion_z, m)?)?;
    m.add_function(wrap_pyfunction!(default_map, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(train_baseline, m)?)?;
    m.add(
        "CONDITIONS",
        Condition::ALL
            .iter()
            .map(|c| c.as_str())
            .collect::<Vec<_>>(),
    )?;
    m.add("FRAME_SIZE", FRAME_SIZE)?;
    Ok(())
}
