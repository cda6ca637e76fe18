//! Helpers for the acceptance suite in `tests/acceptance.rs`.

use std::path::PathBuf;

/// Path of a workspace binary, found next to the running test executable
/// (`target/<profile>/deps/..` -> `target/<profile>/<name>`).
pub fn workspace_bin(name: &str) -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let mut dir = exe.parent()?;
    if dir.ends_with("deps") {
        dir = dir.parent()?;
    }
    let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    path.exists().then_some(path)
}
