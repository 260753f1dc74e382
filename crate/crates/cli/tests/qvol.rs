use hire_cli::qvol::*;
use hire_cli::CliError;
use hire_core::{GridSpec, RoiMask, ScalarVolume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_volume(n: usize, seed: u64) -> ScalarVolume {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = GridSpec::isotropic(n, 0.75).unwrap();
    ScalarVolume::from_fn(g, |_, _, _| rng.random_range(-1.0f32..1.0) as f64).unwrap()
}

#[test]
fn f32_round_trip_is_bit_exact() {
    let v = random_volume(32, 3);
    let bytes = encode_volume(&v);
    let back = decode(&bytes).unwrap().into_volume().unwrap();
    assert_eq!(back, v);
    assert_eq!(encode_volume(&back), bytes);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.qvol");
    write_volume(&v, &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes);
    assert_eq!(read_volume(&path).unwrap(), v);
}

#[test]
fn header_layout() {
    let g = GridSpec::new([4, 5, 6], [1.0, 0.5, 2.25]).unwrap();
    let bytes = encode_volume(&ScalarVolume::zeros(g));
    let expected = b"QVOL1\n{\"dims\":[4,5,6],\"spacing\":[1.0,0.5,2.25],\"dtype\":\"f32\",\"order\":\"x-fastest\"}\n";
    assert_eq!(&bytes[..expected.len()], expected);
    assert_eq!(bytes.len(), expected.len() + 4 * 120);
}

#[test]
fn samples_are_little_endian_x_fastest() {
    let g = GridSpec::new([4, 4, 5], [1.0; 3]).unwrap();
    let v = ScalarVolume::from_fn(g, |i, j, k| (i + 10 * j + 100 * k) as f64).unwrap();
    let bytes = encode_volume(&v);
    let payload = &bytes[bytes.len() - 4 * 80..];
    assert_eq!(&payload[4..8], &1.0f32.to_le_bytes());
    assert_eq!(&payload[16..20], &10.0f32.to_le_bytes());
    assert_eq!(&payload[64..68], &100.0f32.to_le_bytes());
}

#[test]
fn mask_round_trip_is_bit_exact() {
    let g = GridSpec::new([5, 6, 7], [1.0; 3]).unwrap();
    let m = RoiMask::from_fn(g, |i, j, k| (i * 3 + j + k * 5) % 4 == 0);
    let bytes = encode_mask(&m);
    let back = decode(&bytes).unwrap().into_mask().unwrap();
    assert_eq!(back, m);
    assert_eq!(encode_mask(&back), bytes);
}

#[test]
fn malformed_files_have_distinct_errors() {
    let bytes = encode_volume(&random_volume(8, 1));
    assert!(matches!(
        decode(&bytes[..bytes.len() - 1]),
        Err(CliError::TruncatedPayload { .. })
    ));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode(&long), Err(CliError::TrailingBytes { extra: 1 })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode(&bad), Err(CliError::BadMagic)));
    assert!(matches!(
        decode(b"QVOL1\n{\"dims\":[8,8,8]}\n"),
        Err(CliError::BadHeader(_))
    ));
    assert!(matches!(decode(b"QVOL1\n{\"dims\":"), Err(CliError::BadHeader(_))));
    let reordered = b"QVOL1\n{\"dims\":[4,4,4],\"spacing\":[1,1,1],\"dtype\":\"f32\",\"order\":\"z-fastest\"}\n";
    assert!(matches!(decode(reordered), Err(CliError::BadHeader(_))));
    let mut mask = encode_mask(&RoiMask::full(GridSpec::isotropic(4, 1.0).unwrap()));
    *mask.last_mut().unwrap() = 2;
    assert!(matches!(
        decode(&mask),
        Err(CliError::BadMaskValue { index: 63, value: 2 })
    ));
    assert!(matches!(
        decode(&bytes).unwrap().into_mask(),
        Err(CliError::WrongDtype { .. })
    ));
}

#[test]
fn raw_import_matches_qvol_payload() {
    let v = random_volume(6, 9);
    let raw: Vec<u8> = v.as_slice().iter().flat_map(|&x| (x as f32).to_le_bytes()).collect();
    let q = import_raw(&raw, *v.grid(), RawType::F32).unwrap();
    assert_eq!(q, Qvol::Volume(v.clone()));
    let raw64: Vec<u8> = v.as_slice().iter().flat_map(|&x| x.to_le_bytes()).collect();
    assert_eq!(
        import_raw(&raw64, *v.grid(), RawType::F64).unwrap(),
        Qvol::Volume(v.clone())
    );
    assert!(matches!(
        import_raw(&raw[1..], *v.grid(), RawType::F32),
        Err(CliError::TruncatedPayload { .. })
    ));
    let mask = import_raw(&vec![3u8; 216], *v.grid(), RawType::U8)
        .unwrap()
        .into_mask()
        .unwrap();
    assert_eq!(mask.count(), 216);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_f32_volume_round_trips(
        dims in prop::array::uniform3(4usize..9),
        h in prop::array::uniform3(0.1f64..3.0),
        seed in any::<u64>(),
    ) {
        let g = GridSpec::new(dims, h).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = ScalarVolume::from_fn(g, |_, _, _| f32::from_bits(rng.random::<u32>() & 0xbf7f_ffff) as f64).unwrap();
        let bytes = encode_volume(&v);
        let back = decode(&bytes).unwrap().into_volume().unwrap();
        prop_assert_eq!(&back, &v);
        prop_assert_eq!(encode_volume(&back), bytes);
    }
}
