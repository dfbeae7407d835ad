use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use serde_json::Value;
use tabchain_service::egress::external_connections;
use tabchain_service::journal::read_all;
use tabchain_service::{replay, serve, AppState, Config};

const MOVIES: &str = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";

fn config(dir: &std::path::Path) -> Config {
    let mut c = Config::default();
    c.service.data_dir = dir.to_path_buf();
    c
}

fn session(state: &AppState) -> String {
    let info = state.upload(MOVIES.as_bytes(), Some("movies")).unwrap();
    let id = info.table_id;
    state.query(&id, "Show me the five movies with the highest profit margin").unwrap();
    state.query(&id, "Give me some numbers").unwrap();
    state.commands(&id, "FILTER cost > 40; SORT box_office ASC").unwrap();
    let v2 = state
        .commands(&id, "UPDATE cost = cost * 2 WHERE title = 'B'")
        .unwrap()
        .table_id
        .unwrap();
    state.query(&v2, "Show me the five movies with the highest profit margin").unwrap();
    state.commands(&v2, "DESCRIBE").unwrap();
    state.commands(&v2, "PREDICT box_office USING cost").unwrap();
    assert!(state.commands(&v2, "SORT nosuch ASC").is_err());
    id
}

#[test]
fn journal_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(config(dir.path())).unwrap();
    let id = session(&state);
    let other = state.upload(b"x,y\n1,2.5\n3,\n", None).unwrap().table_id;
    state.commands(&other, "DERIVE z = x + y").unwrap();

    let logs = read_all(dir.path()).unwrap();
    assert_eq!(logs.len(), 2);
    let log = logs.iter().find(|l| l.upload.session_id == id).unwrap();
    // failed submissions are not journaled
    assert_eq!(log.entries.len(), 7);

    let report = replay(config(dir.path())).unwrap();
    assert_eq!(report.sessions, 2);
    assert_eq!(report.entries, 8);
    assert!(report.is_exact(), "{:?}", report.mismatches);
}

#[test]
fn tampered_journal_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(config(dir.path())).unwrap();
    let id = session(&state);
    let path = dir.path().join(format!("sessions/{id}.jsonl"));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen("\"B\"", "\"Z\"", 1)).unwrap();
    let report = replay(config(dir.path())).unwrap();
    assert!(!report.is_exact());
    assert_eq!(report.mismatches[0].seq, 0);
}

#[test]
fn reopened_state_keeps_history_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let state = AppState::new(config(dir.path())).unwrap();
        session(&state)
    };
    let (state, report) = AppState::open(config(dir.path())).unwrap();
    assert!(report.is_exact());
    let h = state.history(&id).unwrap();
    assert_eq!(h.len(), 7);
    let v2 = h[3].result_table_id.clone().unwrap();
    assert_eq!(state.table(&v2).unwrap().table.num_rows(), 6);
    // new entries continue the same journal
    state.commands(&id, "SLICE TOP 1").unwrap();
    assert_eq!(state.history(&id).unwrap()[7].seq, 7);
    let logs = read_all(dir.path()).unwrap();
    assert_eq!(logs[0].entries.len(), 8);
    assert!(replay(config(dir.path())).unwrap().is_exact());
}

#[test]
fn concurrent_sessions_do_not_interleave() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(config(dir.path())).unwrap());
    let ids: Vec<String> = (0..4)
        .map(|_| state.upload(MOVIES.as_bytes(), None).unwrap().table_id)
        .collect();
    std::thread::scope(|s| {
        for id in &ids {
            for k in 0..3 {
                let state = state.clone();
                s.spawn(move || {
                    for n in 1..=5 {
                        state.commands(id, &format!("SLICE TOP {}", k * 10 + n)).unwrap();
                    }
                });
            }
        }
    });
    for id in &ids {
        let h = state.history(id).unwrap();
        assert_eq!(h.len(), 15);
        assert!(h.iter().enumerate().all(|(i, e)| e.seq == i && &e.table_id == id));
    }
    assert!(replay(config(dir.path())).unwrap().is_exact());
}

fn http(addr: std::net::SocketAddr, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).unwrap();
    let status = out[9..12].parse().unwrap();
    let body = out.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn live_server_stays_on_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(config(dir.path())).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(serve(state, listener));

    let (status, body) = http(addr, "POST", "/tables?name=movies", MOVIES);
    assert_eq!(status, 201);
    let id = serde_json::from_str::<Value>(&body).unwrap()["table_id"].as_str().unwrap().to_string();
    let (status, body) = http(
        addr,
        "POST",
        &format!("/tables/{id}/query"),
        r#"{"text":"Give me some numbers"}"#,
    );
    assert_eq!(status, 200);
    assert!(body.contains("clarification"));
    let (status, _) = http(addr, "GET", &format!("/tables/{id}/embedding"), "");
    assert_eq!(status, 200);
    assert!(external_connections(None).unwrap().is_empty());
}
