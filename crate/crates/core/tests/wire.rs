use hsar_core::wire::{WireFrame, WirePoint, FLAG_CLASS_OVERLAY, HEADER_LEN, TEST_VECTORS_JSON};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Valid {
    name: String,
    frame: WireFrame,
    hex: String,
}

#[derive(Deserialize)]
struct Invalid {
    name: String,
    hex: String,
}

#[derive(Deserialize)]
struct Vectors {
    valid: Vec<Valid>,
    invalid: Vec<Invalid>,
}

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

fn vectors() -> Vectors {
    serde_json::from_str(TEST_VECTORS_JSON).unwrap()
}

#[test]
fn published_vectors_encode_and_decode_exactly() {
    let v = vectors();
    assert!(v.valid.len() >= 5);
    for case in &v.valid {
        let bytes = unhex(&case.hex);
        assert_eq!(case.frame.encode().unwrap(), bytes, "{}", case.name);
        let back = WireFrame::decode(&bytes).unwrap();
        assert_eq!(back, case.frame, "{}", case.name);
        for (a, b) in back.points.iter().zip(&case.frame.points) {
            assert_eq!(
                a.position.map(f32::to_bits),
                b.position.map(f32::to_bits),
                "{}",
                case.name
            );
        }
    }
}

#[test]
fn published_invalid_vectors_are_rejected() {
    for case in vectors().invalid {
        assert!(WireFrame::decode(&unhex(&case.hex)).is_err(), "{}", case.name);
    }
}

fn wire_frame() -> impl Strategy<Value = WireFrame> {
    let point = (prop::array::uniform3(any::<u32>()), any::<[u8; 4]>(), any::<[u8; 4]>());
    (any::<u64>(), any::<u32>(), prop::collection::vec(point, 0..40)).prop_map(|(frame_index, flags, pts)| {
        let overlay = flags & FLAG_CLASS_OVERLAY != 0;
        WireFrame {
            frame_index,
            flags,
            points: pts
                .into_iter()
                .map(|(bits, rgb, class)| WirePoint {
                    position: bits.map(f32::from_bits),
                    rgb,
                    class_rgb: if overlay { class } else { [0; 4] },
                })
                .collect(),
        }
    })
}

fn same_bits(a: &WireFrame, b: &WireFrame) -> bool {
    a.frame_index == b.frame_index
        && a.flags == b.flags
        && a.points.len() == b.points.len()
        && a.points.iter().zip(&b.points).all(|(p, q)| {
            p.position.map(f32::to_bits) == q.position.map(f32::to_bits) && p.rgb == q.rgb && p.class_rgb == q.class_rgb
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encode_decode_is_a_bijection(f in wire_frame()) {
        let bytes = f.encode().unwrap();
        prop_assert_eq!(bytes.len(), f.encoded_len());
        let back = WireFrame::decode(&bytes).unwrap();
        prop_assert!(same_bits(&back, &f));
        prop_assert_eq!(back.encode().unwrap(), bytes);
    }

    #[test]
    fn any_strict_prefix_is_rejected(f in wire_frame(), cut in any::<prop::sample::Index>()) {
        let bytes = f.encode().unwrap();
        let n = cut.index(bytes.len());
        prop_assert!(WireFrame::decode(&bytes[..n]).is_err());
    }

    #[test]
    fn random_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Ok(f) = WireFrame::decode(&bytes) {
            prop_assert_eq!(f.encode().unwrap(), bytes);
        }
    }
}

#[test]
fn max_size_frame_round_trips() {
    let n = 1024 * 768;
    let f = WireFrame {
        frame_index: u64::MAX,
        flags: FLAG_CLASS_OVERLAY,
        points: (0..n)
            .map(|i| WirePoint {
                position: [i as f32, -(i as f32) * 1e-3, 0.25],
                rgb: [(i % 251) as u8, 1, 2, 255],
                class_rgb: [3, (i % 7) as u8, 5, 255],
            })
            .collect(),
    };
    let bytes = f.encode().unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 20 * n);
    assert!(bytes.len() < 16 * 1024 * 1024);
    assert!(same_bits(&WireFrame::decode(&bytes).unwrap(), &f));
}
