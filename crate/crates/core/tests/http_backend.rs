use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

use psynorm::baselines::features::LogprobSource;
use psynorm::gateway::{
    Backend, BackendError, ChatRequest, FineTuneHyperparams, Gateway, GatewayError, HttpBackend, JobStatus,
    PollOptions, RetryPolicy,
};
use psynorm::prompting::Message;

#[derive(Debug, Clone)]
struct Seen {
    method: String,
    path: String,
    auth: Option<String>,
    content_type: Option<String>,
    body: Vec<u8>,
}

/// Serves the scripted `(status, body)` replies in order, one per
/// connection, and records every request.
fn serve(replies: Vec<(u16, Value)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut parts = line.split_whitespace();
            let method = parts.next().unwrap_or_default().to_string();
            let path = parts.next().unwrap_or_default().to_string();
            let (mut len, mut chunked, mut auth, mut ctype) = (0usize, false, None, None);
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                let v = v.trim().to_string();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.parse().unwrap(),
                    "transfer-encoding" => chunked = v.eq_ignore_ascii_case("chunked"),
                    "authorization" => auth = Some(v),
                    "content-type" => ctype = Some(v),
                    _ => {}
                }
            }
            let mut body_in = Vec::new();
            if chunked {
                loop {
                    let mut size = String::new();
                    reader.read_line(&mut size).unwrap();
                    let n = usize::from_str_radix(size.trim(), 16).unwrap();
                    let mut chunk = vec![0; n + 2];
                    reader.read_exact(&mut chunk).unwrap();
                    if n == 0 {
                        break;
                    }
                    body_in.extend_from_slice(&chunk[..n]);
                }
            } else {
                body_in.resize(len, 0);
                reader.read_exact(&mut body_in).unwrap();
            }
            log.lock().unwrap().push(Seen {
                method,
                path,
                auth,
                content_type: ctype,
                body: body_in,
            });
            let text = body.to_string();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn chat_reply(text: &str) -> Value {
    json!({"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]})
}

fn request() -> ChatRequest {
    ChatRequest::new("gpt-3.5-turbo", vec![Message::user("Rate: cats")], 16)
}

#[test]
fn chat_wire_format() {
    let (url, seen) = serve(vec![(200, chat_reply("0.42"))]);
    let backend = HttpBackend::new(url, Some("sk-test".into())).unwrap();
    let reply = backend.chat(&request()).unwrap();
    assert_eq!(reply.text, "0.42");

    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].method, "POST");
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sk-test"));
    let body: Value = serde_json::from_slice(&seen[0].body).unwrap();
    assert_eq!(body["model"], "gpt-3.5-turbo");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], 16);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Rate: cats");
}

#[test]
fn transient_errors_are_retried() {
    let (url, seen) = serve(vec![
        (429, json!({"error": {"message": "slow down"}})),
        (503, json!({"error": {"message": "busy"}})),
        (200, chat_reply("0.7")),
    ]);
    let gw = Gateway::new(Arc::new(HttpBackend::new(url, None).unwrap())).with_retry(RetryPolicy::immediate(5));
    let r = gw.complete(&request()).unwrap();
    assert_eq!(r.text, "0.7");
    assert_eq!(r.retries, 2);
    assert_eq!(gw.backend_calls(), 3);
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, seen) = serve(vec![(401, json!({"error": {"message": "bad key"}}))]);
    let gw = Gateway::new(Arc::new(HttpBackend::new(url, Some("nope".into())).unwrap()))
        .with_retry(RetryPolicy::immediate(5));
    match gw.complete(&request()) {
        Err(GatewayError::Auth(m)) => assert_eq!(m, "bad key"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn client_errors_are_fatal() {
    let (url, _) = serve(vec![(400, json!({"error": {"message": "context too long"}}))]);
    let err = HttpBackend::new(url, None).unwrap().chat(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Fatal { status: Some(400), .. }), "{err:?}");
}

#[test]
fn missing_key_variable_is_an_auth_error() {
    let err = HttpBackend::from_env("http://127.0.0.1:9", "PSYNORM_TEST_SURELY_UNSET_KEY")
        .err()
        .unwrap();
    assert!(matches!(err, BackendError::Auth(ref m) if m.contains("PSYNORM_TEST_SURELY_UNSET_KEY")));
}

#[test]
fn finetune_lifecycle() {
    let job = |status: &str, model: Value| {
        json!({"id": "ftjob-7", "model": "gpt-3.5-turbo", "training_file": "file-1", "status": status,
               "fine_tuned_model": model,
               "hyperparameters": {"n_epochs": 3, "batch_size": 1, "learning_rate_multiplier": 2.0}})
    };
    let (url, seen) = serve(vec![
        (200, json!({"id": "file-1", "object": "file"})),
        (200, job("validating_files", Value::Null)),
        (200, job("running", Value::Null)),
        (200, job("succeeded", json!("ft:gpt-3.5-turbo:org::abc"))),
    ]);
    let gw = Gateway::new(Arc::new(HttpBackend::new(url, Some("k".into())).unwrap()));
    let line = r#"{"messages":[{"role":"user","content":"Rate: cats"},{"role":"assistant","content":"0.50"}]}"#;
    let training = format!("{line}\n");
    let hp = FineTuneHyperparams::default();
    let poll = PollOptions {
        interval: std::time::Duration::from_millis(1),
        timeout: std::time::Duration::from_secs(30),
    };
    let done = gw
        .run_finetune(training.as_bytes(), "gpt-3.5-turbo", &hp, poll)
        .unwrap();
    assert_eq!(done.status, JobStatus::Succeeded);
    assert_eq!(done.result_model.as_deref(), Some("ft:gpt-3.5-turbo:org::abc"));

    let seen = seen.lock().unwrap();
    let paths: Vec<(&str, &str)> = seen.iter().map(|s| (s.method.as_str(), s.path.as_str())).collect();
    assert_eq!(
        paths,
        [
            ("POST", "/v1/files"),
            ("POST", "/v1/fine_tuning/jobs"),
            ("GET", "/v1/fine_tuning/jobs/ftjob-7"),
            ("GET", "/v1/fine_tuning/jobs/ftjob-7"),
        ]
    );
    assert!(seen[0]
        .content_type
        .as_deref()
        .unwrap()
        .starts_with("multipart/form-data"));
    let upload = String::from_utf8_lossy(&seen[0].body);
    assert!(upload.contains("fine-tune") && upload.contains(line));
    let create: Value = serde_json::from_slice(&seen[1].body).unwrap();
    assert_eq!(create["training_file"], "file-1");
    assert_eq!(create["hyperparameters"]["n_epochs"], 3);
}

#[test]
fn echoed_logprobs() {
    let (url, seen) = serve(vec![(
        200,
        json!({"choices": [{"logprobs": {"tokens": ["The", " cat"], "token_logprobs": [null, -2.5],
               "text_offset": [0, 3]}}]}),
    )]);
    let lp = HttpBackend::new(url, None)
        .unwrap()
        .token_logprobs("davinci-002", "The cat")
        .unwrap();
    assert_eq!(lp.len(), 2);
    assert_eq!(lp[0].logprob, None);
    assert_eq!(
        (lp[1].token.as_str(), lp[1].logprob, lp[1].offset),
        (" cat", Some(-2.5), 3)
    );
    let body: Value = serde_json::from_slice(&seen.lock().unwrap()[0].body).unwrap();
    assert_eq!(body["echo"], true);
    assert_eq!(body["max_tokens"], 0);
}
