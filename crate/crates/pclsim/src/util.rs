//! Small filesystem helpers shared across modules.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Write a file atomically: the bytes land in a temp file in the target
/// directory and are renamed into place, so readers never observe a partial
/// write and two interleaved writers leave one complete version.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Rescale `values` proportionally so their sum does not exceed `cap`.
///
/// A single multiplication by `cap / sum` can leave the sum a few ULPs above
/// `cap`, so the factor is re-applied until the invariant holds exactly; the
/// loop terminates because each pass strictly shrinks the sum.
pub(crate) fn proportional_rescale(values: &mut [f64], cap: f64) {
    let mut sum: f64 = values.iter().sum();
    while sum > cap {
        let factor = cap / sum;
        for v in values.iter_mut() {
            *v *= factor;
        }
        let next: f64 = values.iter().sum();
        if next >= sum {
            // Defensive: cannot make progress (all zeros / denormals).
            break;
        }
        sum = next;
    }
}
