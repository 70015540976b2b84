pub mod diffuse;
pub mod dist;
pub mod eval;
pub mod gradcheck;
pub mod replay;
pub mod transfer;

use std::path::Path;

use swot_core::{Error, PointCloud, Result};

/// Load a point cloud by extension (.swpc binary or .csv text).
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("swpc") => PointCloud::load_swpc(path),
        Some("csv") => PointCloud::load_csv(path),
        other => Err(Error::UnsupportedFormat(
            other.unwrap_or("<none>").to_string(),
        )),
    }
}

/// Shallow-recursive JSON object merge: `over` wins on scalar conflicts.
pub fn merge_json(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
