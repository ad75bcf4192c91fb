mod common;

use common::strategy::message;
use proptest::collection::vec;
use proptest::prelude::*;
use search_wire::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn decode_inverts_encode(msg in message()) {
        let bytes = encode_frame(&msg).unwrap();
        let (decoded, used) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(decoded, msg);
    }

    #[test]
    fn encoding_is_deterministic(msg in message()) {
        prop_assert_eq!(encode_frame(&msg).unwrap(), encode_frame(&msg.clone()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concatenated_frames_split_exactly(msgs in vec(message(), 0..=100)) {
        let mut stream = Vec::new();
        for m in &msgs {
            stream.extend(encode_frame(m).unwrap());
        }
        let mut decoded = Vec::new();
        let mut rest = &stream[..];
        while !rest.is_empty() {
            let (m, used) = decode_frame(rest).unwrap();
            decoded.push(m);
            rest = &rest[used..];
        }
        prop_assert_eq!(decoded, msgs);
    }

    #[test]
    fn every_strict_prefix_is_truncated(msg in message()) {
        let bytes = encode_frame(&msg).unwrap();
        for cut in [0, 1, 3, 4, bytes.len() / 2, bytes.len() - 1] {
            let is_truncated = matches!(decode_frame(&bytes[..cut]), Err(WireError::Truncated { .. }));
            prop_assert!(is_truncated);
        }
    }
}

#[tokio::test]
async fn stream_of_frames_over_a_pipe() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::TestRunner;

    let mut runner = TestRunner::deterministic();
    let msgs: Vec<Message> = (0..100)
        .map(|_| message().new_tree(&mut runner).unwrap().current())
        .collect();
    let (mut a, mut b) = tokio::io::duplex(1024);
    let sent = msgs.clone();
    let writer = tokio::spawn(async move {
        for m in &sent {
            write_message(&mut a, m).await.unwrap();
        }
    });
    let mut got = Vec::new();
    while let Some(m) = read_message(&mut b).await.unwrap() {
        got.push(m);
    }
    writer.await.unwrap();
    assert_eq!(got, msgs);
}
