use proptest::prelude::*;
use ridgeline::image_io::{load_pbm, load_pgm, save_pbm, save_pgm};
use ridgeline::{BinaryImage, Error, GrayImage, Rect};

fn gray(max_w: usize, max_h: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h)
            .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
    })
}

fn binary(max_w: usize, max_h: usize) -> impl Strategy<Value = BinaryImage> {
    (1..=max_w, 1..=max_h).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..=1, w * h)
            .prop_map(move |px| BinaryImage::new(w, h, px).unwrap())
    })
}

proptest! {
    #[test]
    fn pgm_round_trip(img in gray(40, 40)) {
        let bytes = save_pgm(&img);
        prop_assert_eq!(load_pgm(&bytes).unwrap(), img);
        // canonical files survive byte for byte
        prop_assert_eq!(save_pgm(&load_pgm(&bytes).unwrap()), bytes);
    }

    #[test]
    fn pbm_round_trip(img in binary(40, 40)) {
        let bytes = save_pbm(&img);
        prop_assert_eq!(bytes.len() - format!("P4\n{} {}\n", img.width(), img.height()).len(),
                        img.width().div_ceil(8) * img.height());
        prop_assert_eq!(load_pbm(&bytes).unwrap(), img);
    }

    #[test]
    fn crop_composes(img in gray(30, 30), a in any::<[u16; 4]>(), b in any::<[u16; 4]>()) {
        let (w, h) = img.dims();
        let pick = |v: [u16; 4], w: usize, h: usize| {
            let x0 = v[0] as usize % w;
            let y0 = v[1] as usize % h;
            let cw = 1 + v[2] as usize % (w - x0);
            let ch = 1 + v[3] as usize % (h - y0);
            Rect::new(x0, y0, cw, ch)
        };
        let outer = pick(a, w, h);
        let inner = pick(b, outer.w, outer.h);
        let twice = img.crop(outer).unwrap().crop(inner).unwrap();
        let once = img
            .crop(Rect::new(outer.x0 + inner.x0, outer.y0 + inner.y0, inner.w, inner.h))
            .unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn binary_crop_matches_pixels(img in binary(20, 20), v in any::<[u16; 4]>()) {
        let (w, h) = img.dims();
        let x0 = v[0] as usize % w;
        let y0 = v[1] as usize % h;
        let r = Rect::new(x0, y0, 1 + v[2] as usize % (w - x0), 1 + v[3] as usize % (h - y0));
        let c = img.crop(r).unwrap();
        for y in 0..r.h {
            for x in 0..r.w {
                prop_assert_eq!(c.get(x, y), img.get(x0 + x, y0 + y));
            }
        }
    }
}

#[test]
fn pgm_header_with_comments_and_crlf() {
    let mut bytes = b"P5\r\n# scanner output\n3 # width\n2\n# depth\n255\n".to_vec();
    bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
    let img = load_pgm(&bytes).unwrap();
    assert_eq!(img.dims(), (3, 2));
    assert_eq!(img.row(1), &[4, 5, 6]);
}

#[test]
fn pgm_lower_maxval_accepted() {
    let mut bytes = b"P5 2 1 15\n".to_vec();
    bytes.extend_from_slice(&[15, 0]);
    assert_eq!(load_pgm(&bytes).unwrap().pixels(), &[15, 0]);
}

fn decode_field(r: ridgeline::Result<impl std::fmt::Debug>) -> &'static str {
    match r {
        Err(Error::Decode { field, .. }) => field,
        other => panic!("expected a decode error, got {other:?}"),
    }
}

#[test]
fn pgm_errors_name_the_field() {
    assert_eq!(decode_field(load_pgm(b"P2 1 1 255\n\0")), "magic");
    assert_eq!(decode_field(load_pgm(b"P5 x 1 255\n\0")), "width");
    assert_eq!(decode_field(load_pgm(b"P5 1 0 255\n")), "height");
    assert_eq!(decode_field(load_pgm(b"P5 2 2 255\n\0\0")), "payload");
    let wide = load_pgm(b"P5 1 1 65535\n\0\0");
    assert_eq!(decode_field(wide.clone()), "maxval");
    assert!(wide.unwrap_err().to_string().contains("unsupported maxval"));
    assert_eq!(decode_field(load_pgm(b"P5 1 1 15\n\x20")), "payload");
}

#[test]
fn pbm_errors() {
    assert_eq!(decode_field(load_pbm(b"P5 1 1\n\0")), "magic");
    assert_eq!(decode_field(load_pbm(b"P4 9 2\n\0\0\0")), "payload");
}

#[test]
fn pbm_bit_order() {
    let img = BinaryImage::from_fn(10, 1, |x, _| x == 0 || x == 9).unwrap();
    let bytes = save_pbm(&img);
    assert_eq!(&bytes[bytes.len() - 2..], &[0b1000_0000, 0b0100_0000]);
}
