//! JSON file formats for states, channels, isometries and families.
//!
//! Complex entries are `[re, im]` pairs and matrices are row-major nested
//! arrays. Floats are written in their shortest round-trip form, so a write
//! followed by a read reproduces every matrix bit for bit.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::channels::{self, Channel, ChannelRepr, Isometry};
use crate::error::{Error, Result};
use crate::states::LabeledState;
use crate::steering::FamilySpec;
use crate::tensor::{ComplexMatrix, SystemLabel, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub label: String,
    pub dim: usize,
}

pub type MatrixData = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub systems: Vec<SystemSpec>,
    pub matrix: MatrixData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "lowercase")]
pub enum ChannelBody {
    Kraus { operators: Vec<MatrixData> },
    Choi { matrix: MatrixData },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub in_systems: Vec<SystemSpec>,
    pub out_systems: Vec<SystemSpec>,
    #[serde(flatten)]
    pub body: ChannelBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsometryFile {
    pub in_systems: Vec<SystemSpec>,
    pub out_systems: Vec<SystemSpec>,
    pub matrix: MatrixData,
}

/// Either `{"generators": [state, ...]}` or `{"postmap": channel}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyFile {
    Generators(Vec<StateFile>),
    Postmap(ChannelFile),
}

fn labels_from(specs: &[SystemSpec]) -> Vec<SystemLabel> {
    specs.iter().map(|s| SystemLabel::new(s.label.clone(), s.dim)).collect()
}

fn specs_from(labels: &[SystemLabel]) -> Vec<SystemSpec> {
    labels
        .iter()
        .map(|l| SystemSpec {
            label: l.name.clone(),
            dim: l.dim,
        })
        .collect()
}

pub fn matrix_from(data: &MatrixData) -> Result<ComplexMatrix> {
    let rows = data.len();
    let cols = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse("matrix rows have different lengths".into()));
    }
    let entries = data.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    ComplexMatrix::new(rows, cols, entries)
}

pub fn matrix_to(m: &ComplexMatrix) -> MatrixData {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

impl StateFile {
    pub fn to_state(&self) -> Result<LabeledState> {
        LabeledState::new(matrix_from(&self.matrix)?, labels_from(&self.systems))
    }

    pub fn from_state(s: &LabeledState) -> Self {
        StateFile {
            systems: specs_from(s.labels()),
            matrix: matrix_to(s.matrix()),
        }
    }
}

impl ChannelFile {
    pub fn to_channel(&self) -> Result<Channel> {
        let repr = match &self.body {
            ChannelBody::Kraus { operators } => {
                ChannelRepr::Kraus(operators.iter().map(matrix_from).collect::<Result<_>>()?)
            }
            ChannelBody::Choi { matrix } => ChannelRepr::Choi(matrix_from(matrix)?),
        };
        channels::make_channel(repr, labels_from(&self.in_systems), labels_from(&self.out_systems))
    }

    /// Always written in the Choi representation.
    pub fn from_channel(c: &Channel) -> Self {
        ChannelFile {
            in_systems: specs_from(c.in_labels()),
            out_systems: specs_from(c.out_labels()),
            body: ChannelBody::Choi {
                matrix: matrix_to(channels::choi(c)),
            },
        }
    }
}

impl IsometryFile {
    pub fn to_isometry(&self) -> Result<Isometry> {
        Isometry::new(
            matrix_from(&self.matrix)?,
            labels_from(&self.in_systems),
            labels_from(&self.out_systems),
        )
    }

    pub fn from_isometry(v: &Isometry) -> Self {
        IsometryFile {
            in_systems: specs_from(v.in_labels()),
            out_systems: specs_from(v.out_labels()),
            matrix: matrix_to(v.matrix()),
        }
    }
}

impl FamilyFile {
    pub fn to_spec(&self) -> Result<FamilySpec> {
        match self {
            FamilyFile::Generators(gs) => {
                FamilySpec::generators(gs.iter().map(StateFile::to_state).collect::<Result<_>>()?)
            }
            FamilyFile::Postmap(c) => FamilySpec::post_map(c.to_channel()?),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_state(path: &Path) -> Result<LabeledState> {
    read_json::<StateFile>(path)?.to_state()
}

pub fn write_state(path: &Path, s: &LabeledState) -> Result<()> {
    write_json(path, &StateFile::from_state(s))
}

pub fn read_channel(path: &Path) -> Result<Channel> {
    read_json::<ChannelFile>(path)?.to_channel()
}

pub fn write_channel(path: &Path, c: &Channel) -> Result<()> {
    write_json(path, &ChannelFile::from_channel(c))
}

pub fn read_isometry(path: &Path) -> Result<Isometry> {
    read_json::<IsometryFile>(path)?.to_isometry()
}

pub fn write_isometry(path: &Path, v: &Isometry) -> Result<()> {
    write_json(path, &IsometryFile::from_isometry(v))
}

pub fn read_family(path: &Path) -> Result<FamilySpec> {
    read_json::<FamilyFile>(path)?.to_spec()
}
