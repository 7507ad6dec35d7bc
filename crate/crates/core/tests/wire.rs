use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use base64::Engine;
use vps::detector::wire::{Endpoint, WireDetector, WireRequest};
use vps::prelude::*;
use vps::DetectorError;

/// Serves `replies` in order on a loopback port, one connection per
/// request, and hands every request body back through the channel.
fn mock_server(replies: Vec<String>) -> (String, mpsc::Receiver<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut replies = replies.into_iter();
        for stream in listener.incoming() {
            let Some(reply) = replies.next() else { break };
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            tx.send((request_line.trim().to_owned(), String::from_utf8(body).unwrap())).unwrap();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn image() -> Image {
    Image::from_fn(6, 4, |x, y| [x as u8 * 10, y as u8 * 20, 5]).unwrap()
}

#[test]
fn http_backend_sends_protocol_request_and_keeps_small_scores() {
    let reply = r#"{"detections":[{"box":[1,1,5,3],"scores":{"dog":0.001,"cat":0.4}}],"scores_available":true}"#;
    let (url, requests) = mock_server(vec![reply.into()]);
    let det = WireDetector::connect(Endpoint::Http(url), vec![Category::from("dog")], 7)
        .unwrap()
        .with_timeout(Duration::from_secs(10));
    let set = det.detect(&image()).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.detections[0].scores[&Category::from("dog")], 0.001);
    assert_eq!(set.detections[0].bbox, BBox::new(1., 1., 5., 3.).unwrap());

    let (line, body) = requests.recv_timeout(Duration::from_secs(5)).unwrap();
    assert!(line.starts_with("POST /detect "), "{line}");
    let req: WireRequest = serde_json::from_str(&body).unwrap();
    assert_eq!(req.categories, ["dog"]);
    assert_eq!(req.n_max, 7);
    let png = base64::engine::general_purpose::STANDARD.decode(req.image_png_base64).unwrap();
    assert_eq!(Image::from_png_bytes(&png).unwrap(), image());
}

#[test]
fn http_backend_rejects_malformed_responses() {
    let (url, _rx) = mock_server(vec![
        r#"{"detections":[{"box":[4,1,2,3],"scores":{"dog":0.5}}],"scores_available":true}"#.into(),
        r#"{"scores_available":true}"#.into(),
    ]);
    let det = WireDetector::connect(Endpoint::Http(url), vec![Category::from("dog")], 5).unwrap();
    for _ in 0..2 {
        assert!(matches!(det.detect(&image()), Err(DetectorError::Malformed(_))));
    }
}

#[test]
fn http_backend_reports_unreachable_server() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let det = WireDetector::connect(
        Endpoint::Http(format!("http://127.0.0.1:{port}")),
        vec![Category::from("dog")],
        5,
    )
    .unwrap()
    .with_timeout(Duration::from_secs(2));
    let err = det.detect(&image()).unwrap_err();
    assert!(!matches!(err, DetectorError::Malformed(_)), "{err:?}");
}

#[test]
fn stdio_backend_exchanges_one_line_per_request() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("server.sh");
    std::fs::write(
        &script,
        "while read -r line; do\n  echo '{\"detections\":[{\"box\":[0,0,6,4],\"scores\":{\"dog\":0.75}}],\"scores_available\":true}'\ndone\n",
    )
    .unwrap();
    let cmd = format!("sh {}", script.display());
    let endpoint: Endpoint = format!("stdio:{cmd}").parse().unwrap();
    let det = WireDetector::connect(endpoint, vec![Category::from("dog")], 3).unwrap();
    for _ in 0..3 {
        let set = det.detect(&image()).unwrap();
        assert_eq!(set.detections[0].scores[&Category::from("dog")], 0.75);
    }

    // the whole search runs through the channel
    let p = grid_partition(6, 4, 1, 3).unwrap();
    let t = ExplanationTarget::new(BBox::new(0., 0., 6., 4.).unwrap(), "dog");
    let r = greedy_search(&det, &image(), &p, &t, &SearchOptions::default()).unwrap();
    assert_eq!(r.order.len(), 3);
}

#[test]
fn stdio_backend_surfaces_closed_stream() {
    let det = WireDetector::connect("stdio:true".parse().unwrap(), vec![Category::from("dog")], 3).unwrap();
    let err = det.detect(&image()).unwrap_err();
    assert!(matches!(err, DetectorError::Transport(_)), "{err:?}");
}
