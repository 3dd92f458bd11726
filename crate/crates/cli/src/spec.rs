use std::path::{Path, PathBuf};

use blockshuffle::transforms::{ExternalCommand, GlobalNormalize, Identity, PointwiseLut, Transform, TransformError};

use crate::CliError;

/// Parsed `--transform` value.
#[derive(Clone, Debug, PartialEq)]
pub enum TransformSpec {
    Identity,
    Lut(PathBuf),
    Gnorm { mean: [f32; 3], std: [f32; 3] },
    Command(String),
}

impl TransformSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let usage = |msg: &str| CliError::Usage(format!("--transform {text:?}: {msg}"));
        if text == "identity" {
            return Ok(Self::Identity);
        }
        let (kind, arg) = text
            .split_once(':')
            .ok_or_else(|| usage("expected identity, lut:<file>, gnorm:<mean,std> or cmd:<template>"))?;
        match kind {
            "lut" if !arg.is_empty() => Ok(Self::Lut(PathBuf::from(arg))),
            "gnorm" => {
                let values = arg
                    .split(',')
                    .map(|v| v.trim().parse::<f32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| usage("gnorm values must be numbers"))?;
                match values.as_slice() {
                    [m, s] => Ok(Self::Gnorm { mean: [*m; 3], std: [*s; 3] }),
                    [m0, m1, m2, s0, s1, s2] => Ok(Self::Gnorm {
                        mean: [*m0, *m1, *m2],
                        std: [*s0, *s1, *s2],
                    }),
                    _ => Err(usage("gnorm takes mean,std or three means then three stds")),
                }
            }
            "cmd" if !arg.is_empty() => Ok(Self::Command(arg.to_string())),
            _ => Err(usage("unknown transform")),
        }
    }

    pub fn build(&self, workdir: &Path, assume_deterministic: bool) -> Result<Box<dyn Transform>, CliError> {
        Ok(match self {
            Self::Identity => Box::new(Identity),
            Self::Lut(path) => Box::new(PointwiseLut::from_json_file(path).map_err(|e| match e {
                TransformError::Io(msg) => CliError::Io(msg),
                other => CliError::Usage(format!("{}: {other}", path.display())),
            })?),
            Self::Gnorm { mean, std } => {
                Box::new(GlobalNormalize::new(*mean, *std).map_err(|e| CliError::Usage(e.to_string()))?)
            }
            Self::Command(template) => Box::new(
                ExternalCommand::new(template.clone(), workdir)
                    .map_err(|e| CliError::Usage(e.to_string()))?
                    .assume_deterministic(assume_deterministic),
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(TransformSpec::parse("identity").unwrap(), TransformSpec::Identity);
        assert_eq!(
            TransformSpec::parse("lut:curves.json").unwrap(),
            TransformSpec::Lut("curves.json".into())
        );
        assert_eq!(
            TransformSpec::parse("gnorm:128,50").unwrap(),
            TransformSpec::Gnorm { mean: [128.0; 3], std: [50.0; 3] }
        );
        assert_eq!(
            TransformSpec::parse("gnorm:1,2,3,4,5,6").unwrap(),
            TransformSpec::Gnorm { mean: [1.0, 2.0, 3.0], std: [4.0, 5.0, 6.0] }
        );
        assert_eq!(
            TransformSpec::parse("cmd:cp {in} {out}").unwrap(),
            TransformSpec::Command("cp {in} {out}".into())
        );
    }

    #[test]
    fn rejects_bad_forms() {
        for bad in ["", "blur", "gnorm:1", "gnorm:a,b", "lut:", "cmd:", "gnorm:1,2,3"] {
            assert!(matches!(TransformSpec::parse(bad), Err(CliError::Usage(_))), "{bad}");
        }
        let bad_std = TransformSpec::parse("gnorm:128,0").unwrap();
        assert!(matches!(bad_std.build(Path::new("."), false), Err(CliError::Usage(_))));
        let no_out = TransformSpec::parse("cmd:cat {in}").unwrap();
        assert!(matches!(no_out.build(Path::new("."), false), Err(CliError::Usage(_))));
    }
}
