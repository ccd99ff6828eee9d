mod common;

use std::io::Write;
use std::net::TcpListener;
use std::thread;

use common::ev;
use procmap::ingest::{read_events, replay, tcp_stream, write_events, Mode, Order, ParseErrorKind, SourceError};

#[test]
fn tcp_lines_arrive_in_order() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let sent: Vec<_> = (0..500).map(|i| ev(&format!("c{}", i % 7), "A", i)).collect();
    let to_send = sent.clone();
    let server = thread::spawn(move || {
        let (mut sock, _) = listener.accept().unwrap();
        write_events(&mut sock, &to_send).unwrap();
    });
    let got: Vec<_> = tcp_stream(&addr.to_string())
        .unwrap()
        .collect::<Result<_, _>>()
        .unwrap();
    server.join().unwrap();
    assert_eq!(got, sent);
}

#[test]
fn tcp_reports_bad_lines_with_position() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let (mut sock, _) = listener.accept().unwrap();
        sock.write_all(b"1,A,5\n1,B\n").unwrap();
    });
    let got: Vec<_> = tcp_stream(&addr.to_string()).unwrap().collect();
    server.join().unwrap();
    assert!(got[0].is_ok());
    match &got[1] {
        Err(SourceError::Parse(e)) => {
            assert_eq!(e.line, 2);
            assert_eq!(e.kind, ParseErrorKind::FieldCount(2));
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn refused_connection_is_an_io_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    assert!(matches!(tcp_stream(&format!("127.0.0.1:{port}")), Err(SourceError::Io { .. })));
}

#[test]
fn strict_mode_stops_at_first_bad_line() {
    let text = "1,A,1\n1,\"B,2\n1,C,3\n";
    let err = read_events(text.as_bytes(), "mem".as_ref(), Mode::Strict).unwrap_err();
    match err {
        SourceError::Parse(e) => {
            assert_eq!((e.line, e.column), (2, 3));
            assert_eq!(e.kind, ParseErrorKind::UnterminatedQuote);
        }
        other => panic!("{other:?}"),
    }
    let lenient = read_events(text.as_bytes(), "mem".as_ref(), Mode::Lenient).unwrap();
    assert_eq!(lenient.events.len(), 2);
}

#[test]
fn replay_sorts_stably() {
    let dir = tempdir();
    let path = dir.join("log.csv");
    std::fs::write(&path, "c,A,20\nc,B,10\nd,C,10\n").unwrap();
    let out = replay(&path, Order::ByTimestamp, Mode::Strict).unwrap();
    let acts: Vec<&str> = out.events.iter().map(|e| e.activity.as_str()).collect();
    assert_eq!(acts, ["B", "C", "A"]);
    let missing = replay(&dir.join("nope.csv"), Order::AsIs, Mode::Strict);
    assert!(matches!(missing, Err(SourceError::Io { .. })));
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("procmap-sources-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
