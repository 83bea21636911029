use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{quantity} = {value} is outside the valid range [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error(
        "no phase-matching solution for signal in [{window_nm:?}] nm \
         (delta-k at window edges: {dk_low:.4e} / {dk_high:.4e} rad/m)"
    )]
    NoSolution {
        window_nm: (f64, f64),
        dk_low: f64,
        dk_high: f64,
    },

    #[error("spectral grid spans {span_zeros:.2} first-zero widths; at least {required:.2} are needed, widen the span")]
    GridTooNarrow { span_zeros: f64, required: f64 },

    #[error("correlation function covers |dt| <= {available:.4e} s, scan needs {required:.4e} s (spectral grid must have finer detuning spacing)")]
    CoverageInsufficient { required: f64, available: f64 },

    #[error("reflectance {0} is singular for Fresnel inversion (must be < 1)")]
    SingularReflectance(f64),

    #[error("fringe fit failed after {iterations} iterations: {reason} (rms residual {rms_residual:.4e})")]
    FitFailure {
        iterations: usize,
        reason: String,
        rms_residual: f64,
    },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
