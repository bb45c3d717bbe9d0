use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::EncoderKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    DiffPool,
}

/// A model name such as `mean_CNN_GCN5`, `diff20_CNN` or `mean_CNN_64split`.
///
/// Grammar: `(mean|diff<p>)_(CNN|TCN)[_GCN[<p>]][_<k>split]`. The threshold
/// may appear on the pooling token, the GCN token, or both (then they must agree).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelName {
    pub pooling: Pooling,
    pub encoder: EncoderKind,
    pub use_gcn: bool,
    pub threshold_percent: Option<f64>,
    /// Samples per subject, when the name carries a `<k>split` suffix.
    pub splits: Option<usize>,
}

fn parse_percent(s: &str, name: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    let p: f64 = s
        .parse()
        .map_err(|_| Error::Config(format!("bad threshold `{s}` in model name `{name}`")))?;
    Ok(Some(p))
}

fn merge(a: Option<f64>, b: Option<f64>, name: &str) -> Result<Option<f64>> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(Error::Config(format!(
            "model name `{name}` names two thresholds ({x} and {y})"
        ))),
        (Some(x), _) | (_, Some(x)) => Ok(Some(x)),
        (None, None) => Ok(None),
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognized model name `{name}`"));
        let mut parts = name.split('_');
        let head = parts.next().ok_or_else(bad)?;
        let (pooling, mut threshold) = if head == "mean" {
            (Pooling::Mean, None)
        } else if let Some(rest) = head.strip_prefix("diff") {
            (Pooling::DiffPool, parse_percent(rest, name)?)
        } else {
            return Err(bad());
        };
        let encoder = match parts.next() {
            Some("CNN") => EncoderKind::Cnn,
            Some("TCN") => EncoderKind::Tcn,
            _ => return Err(bad()),
        };
        let mut use_gcn = false;
        let mut splits = None;
        for part in parts {
            if let Some(rest) = part.strip_prefix("GCN") {
                if use_gcn || splits.is_some() {
                    return Err(bad());
                }
                use_gcn = true;
                threshold = merge(threshold, parse_percent(rest, name)?, name)?;
            } else if let Some(k) = part.strip_suffix("split") {
                if splits.is_some() {
                    return Err(bad());
                }
                let k: usize = k.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                splits = Some(k);
            } else {
                return Err(bad());
            }
        }
        Ok(ModelName {
            pooling,
            encoder,
            use_gcn,
            threshold_percent: threshold,
            splits,
        })
    }
}

fn fmt_percent(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.threshold_percent.map(fmt_percent).unwrap_or_default();
        match self.pooling {
            Pooling::Mean => write!(f, "mean")?,
            Pooling::DiffPool => write!(f, "diff{t}")?,
        }
        match self.encoder {
            EncoderKind::Cnn => write!(f, "_CNN")?,
            EncoderKind::Tcn => write!(f, "_TCN")?,
        }
        if self.use_gcn {
            match self.pooling {
                Pooling::Mean => write!(f, "_GCN{t}")?,
                Pooling::DiffPool => write!(f, "_GCN")?,
            }
        }
        if let Some(k) = self.splits {
            if k != 4 {
                write!(f, "_{k}split")?;
            }
        }
        Ok(())
    }
}
