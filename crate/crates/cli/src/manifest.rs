//! Run manifest embedded in every output artifact.

use serde::Serialize;

use crate::GlobalOpts;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<String>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, global: &GlobalOpts, extra: serde_json::Value) -> Self {
        let mut config = serde_json::to_value(global).expect("options serialize");
        // the thread count never changes results, so it stays out of the echo
        if let Some(map) = config.as_object_mut() {
            map.remove("threads");
            map.remove("out_dir");
            if let serde_json::Value::Object(extra) = extra {
                map.extend(extra);
            }
        }
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            inputs: Vec::new(),
            config,
            outputs: Vec::new(),
        }
    }

    /// Compact single-line JSON.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// `# manifest <json>` comment lines for text artifacts.
    pub fn comment_lines(&self) -> Vec<String> {
        vec![format!("manifest {}", self.to_line())]
    }

    /// Prefixes a text body with `# manifest …`.
    pub fn prefix(&self, body: &str) -> String {
        let mut out = String::new();
        for c in self.comment_lines() {
            out.push_str("# ");
            out.push_str(&c);
            out.push('\n');
        }
        out.push_str(body);
        out
    }
}
