//! Single-channel signal files.
//!
//! CSV with an optional header row and either one column (`value`, rate
//! given by `--fs`) or two (`time_s,value`, rate inferred from the time
//! column when `--fs` is absent).

use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub fs: f64,
    pub samples: Vec<f64>,
}

pub fn read(path: &Path, fs: Option<f64>) -> Result<Signal, CliError> {
    let bad = |reason: String| CliError::Signal {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().collect();
        if i == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if !(1..=2).contains(&fields.len()) {
            return Err(bad(format!(
                "row {}: expected 1 or 2 columns, got {}",
                i + 1,
                fields.len()
            )));
        }
        if *width.get_or_insert(fields.len()) != fields.len() {
            return Err(bad(format!("row {}: inconsistent column count", i + 1)));
        }
        let nums = fields
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("row {}: non-finite value", i + 1)));
        }
        if let [t, v] = nums[..] {
            times.push(t);
            samples.push(v);
        } else {
            samples.push(nums[0]);
        }
    }
    if samples.is_empty() {
        return Err(bad("no samples".into()));
    }
    let fs = match fs {
        Some(f) if f > 0.0 && f.is_finite() => f,
        Some(f) => return Err(CliError::Usage(format!("--fs must be positive, got {f}"))),
        None if times.len() >= 2 => {
            let span = times[times.len() - 1] - times[0];
            if !(span > 0.0) {
                return Err(bad("time column is not increasing".into()));
            }
            (times.len() - 1) as f64 / span
        }
        None => {
            return Err(CliError::Usage(format!(
                "{}: single-column file, pass --fs",
                path.display()
            )))
        }
    };
    Ok(Signal { fs, samples })
}

pub fn write(path: &Path, fs: f64, samples: &[f64]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut out = String::from("time_s,value\n");
    for (i, v) in samples.iter().enumerate() {
        out.push_str(&format!("{},{v}\n", i as f64 / fs));
    }
    std::fs::write(path, out).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let two = dir.path().join("two.csv");
        write(&two, 4.0, &[0.0, 1.0, 0.5, 0.25]).unwrap();
        let s = read(&two, None).unwrap();
        assert_eq!(s.samples, vec![0.0, 1.0, 0.5, 0.25]);
        assert!((s.fs - 4.0).abs() < 1e-12);
        let one = dir.path().join("one.csv");
        std::fs::write(&one, "1\n2\n3\n").unwrap();
        assert_eq!(read(&one, Some(2.0)).unwrap().samples, vec![1.0, 2.0, 3.0]);
        assert!(matches!(read(&one, None), Err(CliError::Usage(_))));
    }

    #[test]
    fn rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,v\n0,1\n0.1,x\n").unwrap();
        assert!(matches!(read(&p, None), Err(CliError::Signal { .. })));
        std::fs::write(&p, "t,v\n").unwrap();
        assert!(matches!(read(&p, None), Err(CliError::Signal { .. })));
    }
}
