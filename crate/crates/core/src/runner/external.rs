//! Line protocol between the runner and an external simulation process.
//!
//! Each request is one JSON line on the child's stdin:
//!
//! ```text
//! {"run_id":3,"design":{"torque":210.5,"gearbox":"A2"},"use_case":{}}
//! ```
//!
//! and each response one JSON line on its stdout, in any order:
//!
//! ```text
//! {"run_id":3,"status":"ok","targets":{"t_a50":4.91,"E_c":13.2}}
//! {"run_id":3,"status":"failed","reason":"solver diverged"}
//! ```
//!
//! Responses are matched to requests by `run_id`. A response that names the
//! run but breaks the schema fails that run with reason `protocol`; a child
//! exit fails every in-flight run with `process-exit`; a missing response
//! fails the run with `timeout`.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Map, Value as Json};

use super::{SimFailure, Simulator};
use crate::hyperspace::{DesignPoint, HyperSpace, TargetVector, UseCasePoint, Value, Variable};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

type Reply = Result<Vec<f64>, String>;

#[derive(Default)]
struct Pending {
    waiters: HashMap<u64, mpsc::Sender<Reply>>,
    exited: bool,
}

pub struct ExternalProcessSimulator {
    design_names: Vec<String>,
    use_case_names: Vec<String>,
    timeout: Duration,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Arc<Mutex<Pending>>,
    child: Mutex<Child>,
    reader: Option<JoinHandle<()>>,
}

impl ExternalProcessSimulator {
    /// Launches `command` through `sh -c`.
    pub fn spawn(command: &str, space: &HyperSpace, timeout: Duration) -> io::Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::inherit());
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let pending = Arc::new(Mutex::new(Pending::default()));
        let targets = space.target_names();
        let reader = {
            let pending = Arc::clone(&pending);
            std::thread::spawn(move || read_responses(BufReader::new(stdout), &targets, &pending))
        };
        Ok(Self {
            design_names: space.design.iter().map(|v| v.name.clone()).collect(),
            use_case_names: space.use_case.iter().map(|v| v.name.clone()).collect(),
            timeout,
            stdin: Mutex::new(stdin),
            pending,
            child: Mutex::new(child),
            reader: Some(reader),
        })
    }

    fn request_line(&self, run_id: usize, d: &DesignPoint, u: &UseCasePoint) -> String {
        let obj = |names: &[String], values: &[Value]| -> Map<String, Json> {
            names.iter().zip(values).map(|(n, v)| (n.clone(), value_to_json(v))).collect()
        };
        let req = json!({
            "run_id": run_id,
            "design": obj(&self.design_names, &d.0),
            "use_case": obj(&self.use_case_names, &u.0),
        });
        req.to_string() + "\n"
    }
}

impl Simulator for ExternalProcessSimulator {
    fn evaluate(&self, run_id: usize, d: &DesignPoint, u: &UseCasePoint) -> Result<TargetVector, SimFailure> {
        let (tx, rx) = mpsc::channel();
        {
            let mut p = self.pending.lock().expect("pending lock");
            if p.exited {
                return Err(SimFailure::new("process-exit"));
            }
            p.waiters.insert(run_id as u64, tx);
        }
        let line = self.request_line(run_id, d, u);
        let sent = {
            let mut stdin = self.stdin.lock().expect("stdin lock");
            match stdin.as_mut() {
                Some(s) => s.write_all(line.as_bytes()).and_then(|_| s.flush()).is_ok(),
                None => false,
            }
        };
        if !sent {
            self.pending.lock().expect("pending lock").waiters.remove(&(run_id as u64));
            return Err(SimFailure::new("process-exit"));
        }
        match rx.recv_timeout(self.timeout) {
            Ok(Ok(t)) => Ok(TargetVector(t)),
            Ok(Err(reason)) => Err(SimFailure(reason)),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.pending.lock().expect("pending lock").waiters.remove(&(run_id as u64));
                Err(SimFailure::new("timeout"))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(SimFailure::new("process-exit")),
        }
    }
}

impl Drop for ExternalProcessSimulator {
    fn drop(&mut self) {
        self.stdin.lock().expect("stdin lock").take();
        if let Ok(mut child) = self.child.lock() {
            // The shell may have forked; take down its whole group.
            #[cfg(unix)]
            if let Ok(pid) = libc::pid_t::try_from(child.id()) {
                unsafe { libc::kill(-pid, libc::SIGKILL) };
            }
            let _ = child.kill();
            let _ = child.wait();
        }
        // A grandchild of `sh` may still hold stdout open; detach instead of
        // joining so drop never blocks on it.
        if let Some(h) = self.reader.take() {
            if h.is_finished() {
                let _ = h.join();
            }
        }
    }
}

fn read_responses(reader: impl BufRead, targets: &[String], pending: &Mutex<Pending>) {
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let Some((run_id, reply)) = parse_response(&line, targets) else {
            continue;
        };
        let waiter = pending.lock().expect("pending lock").waiters.remove(&run_id);
        if let Some(tx) = waiter {
            let _ = tx.send(reply);
        }
    }
    let mut p = pending.lock().expect("pending lock");
    p.exited = true;
    for (_, tx) in p.waiters.drain() {
        let _ = tx.send(Err("process-exit".into()));
    }
}

/// Returns `None` when the line cannot be attributed to any run.
fn parse_response(line: &str, targets: &[String]) -> Option<(u64, Reply)> {
    let v: Json = serde_json::from_str(line).ok()?;
    let run_id = v.get("run_id")?.as_u64()?;
    let protocol = || Err("protocol".to_owned());
    let reply = match v.get("status").and_then(Json::as_str) {
        Some("ok") => match v.get("targets").and_then(Json::as_object) {
            Some(obj) => targets
                .iter()
                .map(|name| obj.get(name).and_then(Json::as_f64))
                .collect::<Option<Vec<f64>>>()
                .map_or_else(protocol, Ok),
            None => protocol(),
        },
        Some("failed") => Err(v.get("reason").and_then(Json::as_str).unwrap_or("failed").to_owned()),
        _ => protocol(),
    };
    Some((run_id, reply))
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Real(x) => json!(x),
        Value::Label(s) => json!(s),
    }
}

fn value_from_json(v: &Json, var: &Variable) -> Option<Value> {
    let value = match v {
        Json::String(s) => Value::Label(s.clone()),
        Json::Number(n) => Value::Real(n.as_f64()?),
        _ => return None,
    };
    var.check_value(&value).ok().map(|_| value)
}

fn point_from_json(obj: Option<&Json>, vars: &[Variable]) -> Option<Vec<Value>> {
    let obj = match obj {
        Some(Json::Object(o)) => o,
        None if vars.is_empty() => return Some(vec![]),
        _ => return None,
    };
    vars.iter().map(|var| value_from_json(obj.get(&var.name)?, var)).collect()
}

/// Serves `sim` over the line protocol until `input` reaches end of file.
pub fn serve_line_protocol(
    space: &HyperSpace,
    sim: &dyn Simulator,
    input: impl BufRead,
    mut output: impl Write,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Ok(req) = serde_json::from_str::<Json>(&line) else {
            eprintln!("ignoring malformed request line");
            continue;
        };
        let Some(run_id) = req.get("run_id").and_then(Json::as_u64) else {
            eprintln!("ignoring request without run_id");
            continue;
        };
        let design = point_from_json(req.get("design"), &space.design);
        let use_case = point_from_json(req.get("use_case"), &space.use_case);
        let response = match (design, use_case) {
            (Some(d), Some(u)) => match sim.evaluate(run_id as usize, &DesignPoint(d), &UseCasePoint(u)) {
                Ok(t) => {
                    let targets: Map<String, Json> =
                        space.targets.iter().zip(&t.0).map(|(ti, x)| (ti.name.clone(), json!(x))).collect();
                    json!({"run_id": run_id, "status": "ok", "targets": targets})
                }
                Err(e) => json!({"run_id": run_id, "status": "failed", "reason": e.0}),
            },
            _ => json!({"run_id": run_id, "status": "failed", "reason": "protocol"}),
        };
        writeln!(output, "{response}")?;
        output.flush()?;
    }
    Ok(())
}
