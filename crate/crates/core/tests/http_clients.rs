use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use arsimplify_core::classifier::{ErrorClassifier, RemoteClassifier};
use arsimplify_core::llm::{
    HttpBackend, HttpBackendConfig, LlmBackend, LlmError, LlmRequest, RequestPurpose,
};
use arsimplify_core::types::ErrorRegistry;
use serde_json::Value;

/// Serves one canned response per entry, returning each request body.
fn mock_server(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let lower = l.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = l["authorization:".len()..].trim().to_string();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            tx.send((auth, serde_json::from_slice(&buf).unwrap()))
                .unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn request(n: usize) -> LlmRequest {
    LlmRequest {
        prompt: "INPUT: Stir.\n\nOUTPUT:".into(),
        sample_count: n,
        temperature: 0.7,
        max_output_length: 64,
        purpose: RequestPurpose::Execute,
    }
}

fn backend(url: String) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint: url,
        model: "test-model".into(),
        api_key: Some("k3y".into()),
        timeout_secs: 5,
    })
}

#[test]
fn http_backend_sends_n_and_parses_logprobs() {
    let body = r#"{"choices":[
        {"index":1,"message":{"content":"Stir gently."},"logprobs":null},
        {"index":0,"message":{"content":"Stir."},"logprobs":{"content":[{"token":"Stir","logprob":-0.5},{"token":".","logprob":-0.1}]}}
    ]}"#;
    let (url, rx) = mock_server(vec![(200, body.into())]);
    let resp = backend(url).complete_exact(&request(2)).unwrap();
    assert_eq!(resp.samples[0].text, "Stir.");
    assert_eq!(resp.samples[0].token_logprobs, Some(vec![-0.5, -0.1]));
    assert_eq!(resp.samples[1].token_logprobs, None);
    let (auth, sent) = rx.recv().unwrap();
    assert_eq!(auth, "Bearer k3y");
    assert_eq!(sent["n"], 2);
    assert_eq!(sent["model"], "test-model");
    assert_eq!(sent["logprobs"], true);
}

#[test]
fn http_backend_maps_server_errors_to_unavailable() {
    let (url, _rx) = mock_server(vec![(503, "{}".into())]);
    assert!(matches!(
        backend(url).complete(&request(1)),
        Err(LlmError::Unavailable(_))
    ));
}

#[test]
fn http_backend_rejects_short_responses() {
    let body = r#"{"choices":[{"index":0,"message":{"content":"Stir."}}]}"#;
    let (url, _rx) = mock_server(vec![(200, body.into())]);
    assert_eq!(
        backend(url).complete_exact(&request(3)),
        Err(LlmError::WrongCount {
            expected: 3,
            got: 1
        })
    );
}

#[test]
fn unreachable_backend_is_unavailable() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    assert!(matches!(
        backend(url).complete(&request(1)),
        Err(LlmError::Unavailable(_))
    ));
}

#[test]
fn remote_classifier_round_trip_and_validation() {
    let (url, rx) = mock_server(vec![
        (
            200,
            r#"{"probs":[0.1,0.2,0.3],"classifier_id":"remote"}"#.into(),
        ),
        (
            200,
            r#"{"probs":[0.1,1.5,0.3],"classifier_id":"remote"}"#.into(),
        ),
        (200, r#"{"probs":[0.1],"classifier_id":"remote"}"#.into()),
    ]);
    let clf = RemoteClassifier::new(url, ErrorRegistry::default(), Duration::from_secs(5));
    let p = clf.classify("Stir the soup.", "Stir.").unwrap();
    assert_eq!(p.probs, vec![0.1, 0.2, 0.3]);
    let (_, sent) = rx.recv().unwrap();
    assert_eq!(sent["original"], "Stir the soup.");
    assert_eq!(sent["candidate"], "Stir.");
    assert!(clf.classify("a", "b").is_err());
    assert!(clf.classify("a", "b").is_err());
}
