//! Max-affine models as JSON: `{d, grad_cap, pieces: [{g, xi, anchor}], fit_meta}`.

use std::fs;
use std::io;
use std::path::Path;

use drcr_core::model::FitMeta;
use drcr_core::{AffinePiece, MaxAffineModel};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct PieceFile {
    g: f64,
    xi: Vec<f64>,
    anchor: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    objective: f64,
    iterations: usize,
    delta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    d: usize,
    /// `null` for an unbounded model.
    grad_cap: Option<f64>,
    pieces: Vec<PieceFile>,
    fit_meta: MetaFile,
}

/// Pretty JSON with every float written to 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        // Non-finite values never reach here; serde_json maps them to null.
        write!(w, "{v:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn model_to_json(model: &MaxAffineModel) -> Result<String> {
    let meta = model.meta();
    let file = ModelFile {
        d: model.d(),
        grad_cap: model.grad_cap().filter(|c| c.is_finite()),
        pieces: model
            .pieces()
            .iter()
            .map(|p| PieceFile {
                g: p.g,
                xi: p.xi.clone(),
                anchor: p.anchor.clone(),
            })
            .collect(),
        fit_meta: MetaFile {
            objective: meta.objective,
            iterations: meta.iterations,
            delta: meta.delta,
        },
    };
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    file.serialize(&mut ser)
        .map_err(|e| Error::Model(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn model_from_json(text: &str) -> Result<MaxAffineModel> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
    let pieces = file
        .pieces
        .into_iter()
        .map(|p| AffinePiece {
            g: p.g,
            xi: p.xi,
            anchor: p.anchor,
        })
        .collect();
    let meta = FitMeta {
        objective: file.fit_meta.objective,
        iterations: file.fit_meta.iterations,
        delta: file.fit_meta.delta,
    };
    MaxAffineModel::new(file.d, pieces, file.grad_cap, meta).map_err(|e| Error::Model(e.to_string()))
}

pub fn save_model(path: impl AsRef<Path>, model: &MaxAffineModel) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MaxAffineModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
