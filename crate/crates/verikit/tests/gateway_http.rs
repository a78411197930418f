//! Integration tests for the HTTP gateway backend against a real local
//! server: wire format, status handling, retry behavior, batch concurrency,
//! and checkpoint resume.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use verikit::gateway::{ChatRequest, Gateway, GatewayError, HttpConfig, RetryPolicy};

/// One request as the server saw it.
struct RecordedCall {
    auth: Option<String>,
    body: Value,
}

/// Scriptable chat-completions stand-in. Each incoming request consumes the
/// next entry of `statuses` (empty list means 200); `fail_marker` forces a
/// 500 whenever the user message contains the marker, which lets a test
/// fail one specific batch item.
#[derive(Default)]
struct ServerState {
    calls: Mutex<Vec<RecordedCall>>,
    statuses: Mutex<Vec<u16>>,
    fail_marker: Mutex<Option<String>>,
    hold_ms: u64,
    in_flight: AtomicUsize,
    peak_in_flight: AtomicUsize,
    reply_model: Option<String>,
    empty_choices: bool,
    echo_prefix: Option<String>,
}

async fn completions(
    State(state): State<Arc<ServerState>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.peak_in_flight.fetch_max(now, Ordering::SeqCst);

    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned);
    let user = body
        .pointer("/messages")
        .and_then(Value::as_array)
        .and_then(|messages| messages.last())
        .and_then(|message| message.get("content"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned();
    state.calls.lock().unwrap().push(RecordedCall {
        auth,
        body: body.clone(),
    });

    let scripted_status = {
        let mut statuses = state.statuses.lock().unwrap();
        if statuses.is_empty() {
            None
        } else {
            Some(statuses.remove(0))
        }
    };
    if state.hold_ms > 0 {
        tokio::time::sleep(Duration::from_millis(state.hold_ms)).await;
    }
    state.in_flight.fetch_sub(1, Ordering::SeqCst);

    if let Some(status) = scripted_status {
        if status != 200 {
            return (
                StatusCode::from_u16(status).expect("test status must be valid"),
                "scripted failure",
            )
                .into_response();
        }
    }
    let marked = state
        .fail_marker
        .lock()
        .unwrap()
        .as_deref()
        .is_some_and(|marker| user.contains(marker));
    if marked {
        return (StatusCode::INTERNAL_SERVER_ERROR, "marked failure").into_response();
    }

    if state.empty_choices {
        return Json(json!({ "choices": [] })).into_response();
    }
    let content = match &state.echo_prefix {
        Some(prefix) => format!("{prefix}{user}"),
        None => "ok".to_owned(),
    };
    let mut reply = json!({ "choices": [{ "message": { "content": content } }] });
    if let Some(model) = &state.reply_model {
        reply["model"] = json!(model);
    }
    Json(reply).into_response()
}

/// Starts the stand-in server on an ephemeral port and returns a base URL
/// with a deliberate trailing slash (the client must tolerate it).
async fn serve(state: Arc<ServerState>) -> String {
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .expect("bind an ephemeral port");
    let addr = listener.local_addr().expect("listener has an address");
    tokio::spawn(async move {
        axum::serve(listener, app).await.expect("server runs");
    });
    format!("http://{addr}/v1/")
}

fn gateway(base_url: &str, api_key: Option<&str>, policy: RetryPolicy) -> Gateway {
    let mut config = HttpConfig::new(base_url);
    config.api_key = api_key.map(str::to_owned);
    Gateway::http(config, policy).expect("HTTP gateway builds")
}

fn request(user: &str) -> ChatRequest {
    ChatRequest::new("model-x", "sys prompt", user, 0.25)
}

#[tokio::test]
async fn sends_the_documented_wire_format_and_parses_the_reply() {
    let state = Arc::new(ServerState {
        reply_model: Some("served-model".to_owned()),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, Some("secret-key"), RetryPolicy::immediate(3));

    let response = gw.complete(&request("user prompt")).await.expect("succeeds");
    assert_eq!(response.content, "ok");
    assert_eq!(
        response.model, "served-model",
        "the reply's own model name wins over the requested one"
    );

    let calls = state.calls.lock().unwrap();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].auth.as_deref(), Some("Bearer secret-key"));
    assert_eq!(
        calls[0].body,
        json!({
            "model": "model-x",
            "messages": [
                { "role": "system", "content": "sys prompt" },
                { "role": "user", "content": "user prompt" },
            ],
            "temperature": 0.25,
        }),
        "body must carry exactly model, messages, and temperature"
    );
}

#[tokio::test]
async fn empty_system_prompt_is_omitted_and_no_key_means_no_auth_header() {
    let state = Arc::new(ServerState::default());
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(3));

    let req = ChatRequest::new("model-x", "", "solo user", 0.0);
    gw.complete(&req).await.expect("succeeds");

    let calls = state.calls.lock().unwrap();
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].auth, None, "no api key, no Authorization header");
    let messages = calls[0].body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1, "empty system prompt must be skipped");
    assert_eq!(messages[0]["role"], "user");
    assert_eq!(messages[0]["content"], "solo user");
}

#[tokio::test]
async fn rate_limits_are_retried_until_the_server_recovers() {
    let state = Arc::new(ServerState {
        statuses: Mutex::new(vec![429, 429]),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(5));

    let response = gw.complete(&request("rate limited")).await.expect("third attempt lands");
    assert_eq!(response.content, "ok");
    assert_eq!(
        state.calls.lock().unwrap().len(),
        3,
        "two 429s then one success"
    );
}

#[tokio::test]
async fn rate_limit_exhaustion_reports_the_attempt_count() {
    let state = Arc::new(ServerState {
        statuses: Mutex::new(vec![429; 10]),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(4));

    let err = gw.complete(&request("always limited")).await.unwrap_err();
    assert!(
        matches!(err, GatewayError::RateLimit { attempts: 4 }),
        "got {err:?}"
    );
    assert_eq!(state.calls.lock().unwrap().len(), 4);
}

#[tokio::test]
async fn auth_rejections_fail_immediately_without_retry() {
    for status in [401u16, 403] {
        let state = Arc::new(ServerState {
            statuses: Mutex::new(vec![status]),
            ..ServerState::default()
        });
        let base = serve(Arc::clone(&state)).await;
        let gw = gateway(&base, Some("bad-key"), RetryPolicy::immediate(5));

        let err = gw.complete(&request("who goes there")).await.unwrap_err();
        match err {
            GatewayError::Auth { status: got } => assert_eq!(got, status),
            other => panic!("expected Auth, got {other:?}"),
        }
        assert_eq!(
            state.calls.lock().unwrap().len(),
            1,
            "credential failures must not be retried"
        );
    }
}

#[tokio::test]
async fn server_errors_exhaust_the_retry_budget() {
    let state = Arc::new(ServerState {
        fail_marker: Mutex::new(Some(String::new())),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(3));

    let err = gw.complete(&request("doomed")).await.unwrap_err();
    match err {
        GatewayError::Transport { attempts, message } => {
            assert_eq!(attempts, 3);
            assert!(message.contains("HTTP 500"), "got message {message:?}");
        }
        other => panic!("expected Transport, got {other:?}"),
    }
    assert_eq!(state.calls.lock().unwrap().len(), 3);
}

#[tokio::test]
async fn unexpected_statuses_are_fatal_and_carry_a_body_snippet() {
    let state = Arc::new(ServerState {
        statuses: Mutex::new(vec![418]),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(5));

    let err = gw.complete(&request("teapot")).await.unwrap_err();
    match err {
        GatewayError::BadRequest(message) => {
            assert!(message.contains("HTTP 418"), "got message {message:?}");
            assert!(
                message.contains("scripted failure"),
                "body snippet missing from {message:?}"
            );
        }
        other => panic!("expected BadRequest, got {other:?}"),
    }
    assert_eq!(
        state.calls.lock().unwrap().len(),
        1,
        "client errors must not be retried"
    );
}

#[tokio::test]
async fn connection_refused_is_a_transport_error() {
    // Bind a port, learn its address, then free it so nobody listens there.
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);

    let gw = gateway(
        &format!("http://{addr}/v1"),
        None,
        RetryPolicy::immediate(2),
    );
    let err = gw.complete(&request("nobody home")).await.unwrap_err();
    assert!(
        matches!(err, GatewayError::Transport { attempts: 2, .. }),
        "got {err:?}"
    );
}

#[tokio::test]
async fn replies_without_usable_content_are_empty_response_errors() {
    // An explicit empty choices array.
    let state = Arc::new(ServerState {
        empty_choices: true,
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(5));
    let err = gw.complete(&request("empty choices")).await.unwrap_err();
    assert!(matches!(err, GatewayError::EmptyResponse(_)), "got {err:?}");
    assert_eq!(
        state.calls.lock().unwrap().len(),
        1,
        "an empty reply is not worth retrying"
    );

    // A well-formed reply whose content is the empty string.
    let state = Arc::new(ServerState {
        echo_prefix: Some(String::new()),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(5));
    let req = ChatRequest::new("model-x", "sys", "", 0.0);
    let err = gw.complete(&req).await.unwrap_err();
    assert!(matches!(err, GatewayError::EmptyResponse(_)), "got {err:?}");
}

#[tokio::test]
async fn reply_without_model_field_falls_back_to_the_requested_model() {
    let state = Arc::new(ServerState::default());
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(3));

    let response = gw.complete(&request("where am I")).await.expect("succeeds");
    assert_eq!(response.model, "model-x");
}

#[tokio::test(flavor = "multi_thread")]
async fn batch_preserves_input_order_and_respects_the_parallelism_cap() {
    let state = Arc::new(ServerState {
        hold_ms: 40,
        echo_prefix: Some("echo:".to_owned()),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(3));

    let requests: Vec<ChatRequest> = (0..12)
        .map(|i| ChatRequest::new("model-x", "sys", format!("item-{i:02}"), 0.0))
        .collect();
    let results = gw
        .complete_batch(&requests, 4, None)
        .await
        .expect("batch setup succeeds");

    assert_eq!(results.len(), 12);
    for (i, result) in results.iter().enumerate() {
        let response = result.as_ref().expect("every item succeeds");
        assert_eq!(
            response.content,
            format!("echo:item-{i:02}"),
            "results must come back in input order"
        );
    }
    assert_eq!(state.calls.lock().unwrap().len(), 12);

    let peak = state.peak_in_flight.load(Ordering::SeqCst);
    assert!(peak <= 4, "parallelism cap breached: peak {peak}");
    assert!(peak >= 2, "requests never overlapped: peak {peak}");
}

#[tokio::test]
async fn zero_parallelism_is_rejected_up_front() {
    let state = Arc::new(ServerState::default());
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(3));

    let requests = vec![request("never sent")];
    let err = gw.complete_batch(&requests, 0, None).await.unwrap_err();
    assert!(matches!(err, GatewayError::InvalidParallelism), "got {err:?}");
    assert_eq!(state.calls.lock().unwrap().len(), 0);
}

#[tokio::test(flavor = "multi_thread")]
async fn checkpoint_rerun_reissues_exactly_the_failed_items() {
    let dir = tempfile::tempdir().expect("tempdir");
    let checkpoint = dir.path().join("batch.ckpt");

    let state = Arc::new(ServerState {
        fail_marker: Mutex::new(Some("item-3".to_owned())),
        echo_prefix: Some("echo:".to_owned()),
        ..ServerState::default()
    });
    let base = serve(Arc::clone(&state)).await;
    let gw = gateway(&base, None, RetryPolicy::immediate(1));

    let requests: Vec<ChatRequest> = (0..6)
        .map(|i| ChatRequest::new("model-x", "sys", format!("item-{i}"), 0.0))
        .collect();

    // First run: item 3 fails, the other five succeed and are checkpointed.
    let first = gw
        .complete_batch(&requests, 2, Some(&checkpoint))
        .await
        .expect("batch setup succeeds");
    assert!(
        matches!(first[3], Err(GatewayError::Transport { attempts: 1, .. })),
        "got {:?}",
        first[3]
    );
    for (i, result) in first.iter().enumerate() {
        if i != 3 {
            assert_eq!(result.as_ref().unwrap().content, format!("echo:item-{i}"));
        }
    }
    assert_eq!(state.calls.lock().unwrap().len(), 6);

    // Heal the server; the rerun must call it once, for item 3 only.
    *state.fail_marker.lock().unwrap() = None;
    let second = gw
        .complete_batch(&requests, 2, Some(&checkpoint))
        .await
        .expect("batch setup succeeds");
    assert_eq!(
        state.calls.lock().unwrap().len(),
        7,
        "exactly one new request on rerun"
    );
    for (i, result) in second.iter().enumerate() {
        let response = result.as_ref().expect("all items succeed on rerun");
        assert_eq!(response.content, format!("echo:item-{i}"));
        if i != 3 {
            assert_eq!(response.latency_ms, 0, "replayed items never hit the wire");
        }
    }

    // Third run: everything is checkpointed, so nothing is sent at all.
    let third = gw
        .complete_batch(&requests, 2, Some(&checkpoint))
        .await
        .expect("batch setup succeeds");
    assert_eq!(state.calls.lock().unwrap().len(), 7, "no further requests");
    assert!(third.iter().all(|r| r.is_ok()));
}
