// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// The variants track the error classes of the public contracts: malformed
/// input files, broken cross-references inside them, degenerate inputs to
/// numerical routines, caller contract violations and model problems.
/// [`GalaError::Io`] and [`GalaError::Format`] map to the CLI's I/O exit code.
#[derive(Debug, Error)]
pub enum GalaError {
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("singular variance at t = {0}")]
    SingularVariance(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GalaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GalaError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        GalaError::Format { path: path.into(), msg: msg.into() }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, GalaError::Io { .. })
    }

    /// Process exit code: 2 for unreadable or malformed files, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            GalaError::Io { .. } | GalaError::Format { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GalaError>;
