#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use serde_json::Value;
use tempfile::TempDir;

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn ragmcp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ragmcp"));
    for var in ["RAGMCP_SELECTOR_ENDPOINT", "RAGMCP_EMBED_ENDPOINT", "RAGMCP_EMBED_MODEL"] {
        cmd.env_remove(var);
    }
    cmd
}

/// A spawned `ragmcp serve` on an ephemeral port, killed on drop.
pub struct Gateway {
    child: Child,
    pub base: String,
    pub dir: TempDir,
    agent: ureq::Agent,
}

impl Gateway {
    pub fn start(registry_json: &str) -> Gateway {
        Gateway::start_with(registry_json, serde_json::json!({}))
    }

    /// `extra` is merged into the generated config.
    pub fn start_with(registry_json: &str, extra: Value) -> Gateway {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("registry.json"), registry_json).unwrap();
        let mut config = serde_json::json!({ "bind": "127.0.0.1:0", "registry": "registry.json" });
        for (k, v) in extra.as_object().unwrap() {
            config[k] = v.clone();
        }
        let config_path = dir.path().join("serve.json");
        std::fs::write(&config_path, config.to_string()).unwrap();
        let mut child = ragmcp()
            .args(["serve", "--config"])
            .arg(&config_path)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}"));
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Gateway { child, base: format!("http://{addr}"), dir, agent }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_json::<Value>().unwrap_or(Value::Null);
        (status, body)
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        Gateway::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        Gateway::finish(self.agent.post(format!("{}{path}", self.base)).send_json(body))
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        Gateway::finish(self.agent.delete(format!("{}{path}", self.base)).call())
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
