//! Python bindings: an editing session over the deterministic mock backends,
//! plus the mask codec, fallback fill and scenario replay.

use std::path::Path;
use std::sync::Arc;

use easel_core::mock::{FixtureRegistry, FixtureSource, MockBackends};
use easel_core::raster::{self, Bitmap};
use easel_core::script::{self, Scenario};
use easel_core::workflow::CommandSpec;
use easel_core::{CanvasImage, Clock, Command, Engine, EngineConfig, FixedClock, RleMask, Session, SystemClock};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(easel, EditError, PyException, "A command was rejected or failed.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn registry(fixtures: Option<&str>) -> PyResult<Arc<FixtureRegistry>> {
    Ok(Arc::new(match fixtures {
        Some(dir) => FixtureRegistry::load_dir(Path::new(dir)).map_err(value_err)?,
        None => FixtureRegistry::new(),
    }))
}

/// One editing session backed by the mock capabilities.
#[pyclass(module = "easel")]
struct Editor {
    engine: Engine,
    registry: Arc<FixtureRegistry>,
    session: Session,
}

impl Editor {
    fn run(&mut self, command: Command) -> PyResult<String> {
        match self.engine.execute(&mut self.session, command) {
            Ok(entry) => Ok(serde_json::to_string(&entry).expect("entries serialize")),
            Err(e) => Err(EditError::new_err((e.code(), e.to_string()))),
        }
    }
}

#[pymethods]
impl Editor {
    /// `fixtures` is a scene directory; `deterministic` pins timestamps to 0.
    #[new]
    #[pyo3(signature = (fixtures=None, width=512, height=512, fill=true, deterministic=false))]
    fn new(fixtures: Option<&str>, width: u32, height: u32, fill: bool, deterministic: bool) -> PyResult<Self> {
        let registry = registry(fixtures)?;
        let mocks = MockBackends::new(registry.clone());
        let mocks = if fill { mocks } else { mocks.without_fill() };
        let clock: Arc<dyn Clock> = if deterministic { Arc::new(FixedClock(0)) } else { Arc::new(SystemClock) };
        let config = EngineConfig {
            output_size: (width, height),
        };
        Ok(Self {
            engine: Engine::new(Arc::new(mocks), clock, config),
            registry,
            session: Session::new(),
        })
    }

    /// Run a command given as JSON, e.g. `{"op": "chat", "text": "hi"}`.
    /// Returns the history entry as JSON.
    fn execute(&mut self, command_json: &str) -> PyResult<String> {
        let spec: CommandSpec = serde_json::from_str(command_json).map_err(value_err)?;
        let command = spec
            .resolve(Some(self.registry.as_ref() as &dyn FixtureSource))
            .map_err(|e| EditError::new_err(("invalid_command", e.to_string())))?;
        self.run(command)
    }

    fn set_image_png(&mut self, png: &[u8]) -> PyResult<String> {
        let image = CanvasImage::decode_png(png).map_err(value_err)?;
        self.run(Command::SetImage(image))
    }

    fn undo(&mut self) -> PyResult<String> {
        self.run(Command::Undo)
    }

    /// Current canvas as PNG bytes, or None before the first image.
    fn canvas_png<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyBytes>>> {
        self.session
            .canvas()
            .map(|c| Ok(PyBytes::new(py, &c.encode_png().map_err(value_err)?)))
            .transpose()
    }

    #[getter]
    fn canvas_hash(&self) -> Option<String> {
        self.session.canvas_hash().map(|h| h.to_string())
    }

    #[getter]
    fn state(&self) -> String {
        serde_json::to_value(self.session.state())
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.session.revision()
    }

    /// Ids of masks waiting to be used.
    fn masks(&self) -> Vec<String> {
        self.session.pending_masks().map(|m| m.id.clone()).collect()
    }

    /// `(role, text)` pairs.
    fn transcript(&self) -> Vec<(String, String)> {
        self.session
            .transcript()
            .iter()
            .map(|t| {
                let role = serde_json::to_value(t.role).ok().and_then(|v| v.as_str().map(str::to_owned));
                (role.unwrap_or_default(), t.text.clone())
            })
            .collect()
    }

    fn history_json(&self) -> String {
        serde_json::to_string(self.session.history()).expect("entries serialize")
    }
}

/// Column-major run lengths of a row-major bit list, starting with zeros.
#[pyfunction]
fn encode_rle(width: u32, height: u32, bits: Vec<bool>) -> PyResult<Vec<u64>> {
    let bitmap = Bitmap::from_bits(width, height, bits).map_err(value_err)?;
    Ok(raster::encode_rle(&bitmap).counts().to_vec())
}

#[pyfunction]
fn decode_rle(width: u32, height: u32, counts: Vec<u64>) -> PyResult<Vec<bool>> {
    let mask = RleMask::from_counts(width, height, counts).map_err(value_err)?;
    Ok(raster::decode_rle(&mask).bits().to_vec())
}

/// Fill the masked hole of a PNG with the deterministic fallback.
#[pyfunction]
fn fill_hole<'py>(py: Python<'py>, png: &[u8], counts: Vec<u64>) -> PyResult<Bound<'py, PyBytes>> {
    let image = CanvasImage::decode_png(png).map_err(value_err)?;
    let (w, h) = image.dims();
    let hole = RleMask::from_counts(w, h, counts).map_err(value_err)?;
    let out = raster::fill_hole_fallback(&image, &hole).map_err(value_err)?;
    Ok(PyBytes::new(py, &out.encode_png().map_err(value_err)?))
}

#[pyfunction]
fn fnv1a64(data: &[u8]) -> u64 {
    easel_core::fnv1a64(data)
}

/// Replay a scenario script on the mocks. Returns
/// `(passed, final_canvas_hash, canonical_report_json)`.
#[pyfunction]
#[pyo3(signature = (script_json, fixtures=None))]
fn replay(script_json: &str, fixtures: Option<&str>) -> PyResult<(bool, Option<String>, String)> {
    let scenario = Scenario::from_json(script_json).map_err(value_err)?;
    let registry = registry(fixtures)?;
    let engine = Engine::new(
        Arc::new(MockBackends::new(registry.clone())),
        Arc::new(FixedClock(0)),
        EngineConfig::default(),
    );
    let report = script::replay(&scenario, Some(registry.as_ref() as &dyn FixtureSource), &engine);
    Ok((
        report.passed(),
        report.final_canvas_hash.map(|h| h.to_string()),
        report.canonical_json(),
    ))
}

#[pymodule]
fn easel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Editor>()?;
    m.add("EditError", m.py().get_type::<EditError>())?;
    m.add_function(wrap_pyfunction!(encode_rle, m)?)?;
    m.add_function(wrap_pyfunction!(decode_rle, m)?)?;
    m.add_function(wrap_pyfunction!(fill_hole, m)?)?;
    m.add_function(wrap_pyfunction!(fnv1a64, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
