//! Library results checked against naive reimplementations.

use std::collections::VecDeque;

use easel_core::domain::{bind_concepts_to_boxes, denormalize_box, stroke_min_bbox};
use easel_core::mock::{flood_fill, mask_centroid, mock_inpaint};
use easel_core::raster::{
    cut_region, decode_rle, encode_rle, fill_hole_fallback, mask_area, mask_iou, paste_patch, rasterize_stroke,
    Bitmap,
};
use easel_core::{BoundingBox, CanvasImage, InpaintRequest, Point, Rgb, RleMask, Stroke};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(1099511628211);
    }
    h
}

fn random_bitmap(rng: &mut ChaCha8Rng, max: u32) -> Bitmap {
    let (w, h) = (rng.gen_range(1..=max), rng.gen_range(1..=max));
    let density: f64 = rng.gen();
    let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    Bitmap::from_bits(w, h, bits).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> CanvasImage {
    let px = (0..w * h).flat_map(|_| [rng.gen(), rng.gen(), rng.gen(), 255u8]).collect();
    CanvasImage::new(w, h, px).unwrap()
}

#[test]
fn text_colors_follow_fnv() {
    for s in ["dock", "sky", "water", "sunset scene", "white goose", "Halloween ghost", ""] {
        let h = fnv(s.as_bytes());
        let want = Rgb((h >> 16) as u8, (h >> 8) as u8, h as u8);
        assert_eq!(Rgb::of_text(s), want, "{s:?}");
    }
    assert_eq!(fnv(b"a"), 0xaf63dc4c8601ec8c);
}

#[test]
fn content_hash_follows_fnv() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
        let img = random_image(&mut rng, w, h);
        let mut bytes = w.to_le_bytes().to_vec();
        bytes.extend_from_slice(&h.to_le_bytes());
        bytes.extend_from_slice(img.pixels());
        assert_eq!(img.content_hash().0, fnv(&bytes));
        assert_eq!(img.content_hash().to_string(), format!("{:016x}", fnv(&bytes)));
    }
}

fn naive_rle(b: &Bitmap) -> Vec<u64> {
    let mut counts = vec![0u64];
    let mut cur = false;
    for &bit in b.bits() {
        if bit != cur {
            counts.push(0);
            cur = bit;
        }
        *counts.last_mut().unwrap() += 1;
    }
    counts
}

#[test]
fn rle_matches_naive_encoder_and_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let b = random_bitmap(&mut rng, 256);
        let rle = encode_rle(&b);
        assert_eq!(rle.counts(), naive_rle(&b).as_slice());
        assert_eq!(rle.counts().iter().sum::<u64>(), u64::from(b.width() * b.height()));
        assert!(rle.counts()[1..].iter().all(|&c| c > 0));
        assert_eq!(decode_rle(&rle), b);
    }
}

#[test]
fn iou_matches_pixel_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let a = random_bitmap(&mut rng, 40);
        let bits = (0..a.width() * a.height()).map(|_| rng.gen_bool(0.3)).collect();
        let b = Bitmap::from_bits(a.width(), a.height(), bits).unwrap();
        let (ra, rb) = (encode_rle(&a), encode_rle(&b));
        let inter = a.bits().iter().zip(b.bits()).filter(|(x, y)| **x && **y).count();
        let union = a.bits().iter().zip(b.bits()).filter(|(x, y)| **x || **y).count();
        let want = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
        assert!((mask_iou(&ra, &rb).unwrap() - want).abs() < 1e-12);
        assert_eq!(mask_area(&ra), a.bits().iter().filter(|b| **b).count() as u64);
        if mask_area(&ra) > 0 {
            assert_eq!(mask_iou(&ra, &ra).unwrap(), 1.0);
        }
    }
}

fn seg_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    // sample-free closed form via projection, written independently
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 { 0.0 } else { ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0) };
    let (dx, dy) = (a.0 + t * vx - p.0, a.1 + t * vy - p.1);
    dx * dx + dy * dy
}

fn brute_rasterize(points: &[(f64, f64)], radius: f64, w: u32, h: u32) -> Bitmap {
    let r = (radius * f64::from(w.max(h))).max(std::f64::consts::FRAC_1_SQRT_2);
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x * f64::from(w), y * f64::from(h))).collect();
    let mut out = Bitmap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let c = (f64::from(x) + 0.5, f64::from(y) + 0.5);
            let d = if pts.len() == 1 {
                seg_dist2(c, pts[0], pts[0])
            } else {
                pts.windows(2).map(|s| seg_dist2(c, s[0], s[1])).fold(f64::INFINITY, f64::min)
            };
            if d <= r * r {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[test]
fn stroke_raster_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let (w, h) = (rng.gen_range(1..64), rng.gen_range(1..64));
        let n = rng.gen_range(1..6);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let radius = rng.gen_range(1e-6..0.1);
        let stroke = Stroke::new(pts.iter().map(|&(x, y)| Point::new(x, y).unwrap()).collect(), radius).unwrap();
        let got = rasterize_stroke(&stroke, (w, h)).decode();
        assert_eq!(got, brute_rasterize(&pts, radius, w, h));
    }
}

#[test]
fn min_bbox_examples() {
    let s = Stroke::new(vec![Point::new(0.5, 0.5).unwrap()], 1e-6).unwrap();
    let b = stroke_min_bbox(&s);
    assert!((b.x1() - b.x0() - 0.01).abs() < 1e-12 && (b.y1() - b.y0() - 0.01).abs() < 1e-12);
    let s = Stroke::new(vec![Point::new(0.0, 1.0).unwrap()], 1e-6).unwrap();
    let b = stroke_min_bbox(&s);
    assert_eq!(b.x0(), 0.0);
    assert_eq!(b.y1(), 1.0);
    assert!(b.x1() >= 0.01 - 1e-12 && b.y0() <= 0.99 + 1e-12);
}

#[test]
fn denormalize_rounds_half_up() {
    let b = BoundingBox::new(0.25, 0.1, 0.75, 0.9).unwrap();
    let p = denormalize_box(&b, (512, 512)).unwrap();
    assert_eq!((p.x0, p.y0, p.x1, p.y1), (128, 51, 384, 461));
    let b = BoundingBox::new(0.5, 0.5, 1.0, 1.0).unwrap();
    let p = denormalize_box(&b, (3, 3)).unwrap();
    assert_eq!((p.x0, p.y0), (2, 2));
}

/// Literal reading of the fill rule: BFS distance from the known pixels,
/// then layer by layer, row-major, mean of currently known neighbours.
fn naive_fill(img: &CanvasImage, hole: &Bitmap) -> CanvasImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let mut dist = vec![u32::MAX; (w * h) as usize];
    let mut q = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !hole.get(x as u32, y as u32) {
                dist[idx(x, y)] = 0;
                q.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = q.pop_front() {
        for (nx, ny) in [(x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)] {
            if nx >= 0 && ny >= 0 && nx < w && ny < h && dist[idx(nx, ny)] == u32::MAX {
                dist[idx(nx, ny)] = dist[idx(x, y)] + 1;
                q.push_back((nx, ny));
            }
        }
    }
    let mut px = img.to_vec();
    let mut known: Vec<bool> = dist.iter().map(|&d| d == 0).collect();
    let max = dist.iter().copied().max().unwrap();
    for layer in 1..=max {
        for y in 0..h {
            for x in 0..w {
                if dist[idx(x, y)] != layer {
                    continue;
                }
                let mut sum = [0u32; 3];
                let mut n = 0u32;
                for (nx, ny) in [(x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)] {
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && known[idx(nx, ny)] {
                        for c in 0..3 {
                            sum[c] += u32::from(px[idx(nx, ny) * 4 + c]);
                        }
                        n += 1;
                    }
                }
                for c in 0..3 {
                    // round half up: floor(sum / n + 1/2)
                    px[idx(x, y) * 4 + c] = ((f64::from(sum[c]) / f64::from(n)) + 0.5).floor() as u8;
                }
                px[idx(x, y) * 4 + 3] = 255;
                known[idx(x, y)] = true;
            }
        }
    }
    CanvasImage::new(img.width(), img.height(), px).unwrap()
}

#[test]
fn fill_matches_naive_bfs_on_seam_holes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(4..40u32), rng.gen_range(4..40u32));
        let (left, right) = (Rgb(rng.gen(), rng.gen(), rng.gen()), Rgb(rng.gen(), rng.gen(), rng.gen()));
        let px = (0..h)
            .flat_map(|_| (0..w).flat_map(move |x| if x < w / 2 { left.rgba() } else { right.rgba() }))
            .collect();
        let img = CanvasImage::new(w, h, px).unwrap();
        let (hw, hh) = (rng.gen_range(1..=w / 2), rng.gen_range(1..h));
        let (x0, y0) = (w / 2 - hw / 2 - 1, rng.gen_range(0..h - hh));
        let mut hole = Bitmap::new(w, h);
        for y in y0..y0 + hh {
            for x in x0..(x0 + hw + 1).min(w) {
                hole.set(x, y, true);
            }
        }
        let got = fill_hole_fallback(&img, &encode_rle(&hole)).unwrap();
        assert_eq!(got, naive_fill(&img, &hole));
    }
}

#[test]
fn fill_matches_naive_bfs_on_random_holes() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(1..30u32), rng.gen_range(1..30u32));
        let img = random_image(&mut rng, w, h);
        let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.6)).collect();
        if bits.iter().all(|&b| b) {
            continue;
        }
        let hole = Bitmap::from_bits(w, h, bits).unwrap();
        let got = fill_hole_fallback(&img, &encode_rle(&hole)).unwrap();
        assert_eq!(got, naive_fill(&img, &hole));
        for y in 0..h {
            for x in 0..w {
                assert_eq!(got.pixel(x, y)[3], 255);
                if !hole.get(x, y) {
                    assert_eq!(got.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }
}

#[test]
fn fill_examples() {
    let img = CanvasImage::filled(9, 7, Rgb(10, 200, 30)).unwrap();
    let mut hole = Bitmap::new(9, 7);
    for x in 2..7 {
        hole.set(x, 3, true);
    }
    assert_eq!(fill_hole_fallback(&img, &encode_rle(&hole)).unwrap(), img);

    // one pixel with neighbours 0, 1, 1, 1 in red: mean 0.75 rounds to 1
    let mut px = CanvasImage::filled(3, 3, Rgb(1, 0, 0)).unwrap().to_vec();
    px[4 * 1..4 * 1 + 4].copy_from_slice(&[0, 0, 0, 255]);
    let img = CanvasImage::new(3, 3, px).unwrap();
    let mut hole = Bitmap::new(3, 3);
    hole.set(1, 1, true);
    let got = fill_hole_fallback(&img, &encode_rle(&hole)).unwrap();
    assert_eq!(got.pixel(1, 1), [1, 0, 0, 255]);

    // neighbours 1, 2 -> 1.5 rounds up to 2
    let px = vec![1, 0, 0, 255, 0, 0, 0, 0, 2, 0, 0, 255];
    let img = CanvasImage::new(3, 1, px).unwrap();
    let hole = RleMask::from_counts(3, 1, vec![1, 1, 1]).unwrap();
    assert_eq!(fill_hole_fallback(&img, &hole).unwrap().pixel(1, 0), [2, 0, 0, 255]);

    let full = RleMask::from_counts(3, 1, vec![0, 3]).unwrap();
    assert!(fill_hole_fallback(&img, &full).is_err());
}

#[test]
fn cut_then_paste_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 150 {
        let (w, h) = (rng.gen_range(1..48u32), rng.gen_range(1..48u32));
        let img = random_image(&mut rng, w, h);
        let density: f64 = rng.gen();
        let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let mask = encode_rle(&Bitmap::from_bits(w, h, bits).unwrap());
        if mask.is_empty() {
            continue;
        }
        let (patch, holed) = cut_region(&img, &mask).unwrap();
        let bits = mask.decode();
        for y in 0..h {
            for x in 0..w {
                if bits.get(x, y) {
                    assert_eq!(holed.pixel(x, y), [0, 0, 0, 0]);
                } else {
                    assert_eq!(holed.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        assert_eq!(paste_patch(&holed, &patch, (0, 0)), img);
        checked += 1;
    }
}

#[test]
fn translate_there_and_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(20..60u32), rng.gen_range(20..60u32));
        let img = random_image(&mut rng, w, h);
        let base = random_image(&mut rng, w, h);
        // interior object that stays on canvas when moved by up to 5 px
        let mut b = Bitmap::new(w, h);
        for y in 6..h - 6 {
            for x in 6..w - 6 {
                b.set(x, y, rng.gen_bool(0.3));
            }
        }
        b.set(w / 2, h / 2, true);
        let (patch, _) = cut_region(&img, &encode_rle(&b)).unwrap();
        let d = (rng.gen_range(-5..=5i64), rng.gen_range(-5..=5i64));
        let moved = paste_patch(&base, &patch, d);
        let (moved_patch, _) = {
            let mut m = Bitmap::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    let (sx, sy) = (i64::from(x) - d.0, i64::from(y) - d.1);
                    if sx >= 0 && sy >= 0 && sx < i64::from(w) && sy < i64::from(h) && b.get(sx as u32, sy as u32) {
                        m.set(x, y, true);
                    }
                }
            }
            cut_region(&moved, &encode_rle(&m)).unwrap()
        };
        assert_eq!(paste_patch(&base, &moved_patch, (-d.0, -d.1)), paste_patch(&base, &patch, (0, 0)));
    }
}

#[test]
fn paste_off_canvas_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let img = random_image(&mut rng, 16, 16);
    let mask = RleMask::from_counts(16, 16, vec![17, 3, 236]).unwrap();
    let (patch, holed) = cut_region(&img, &mask).unwrap();
    assert_eq!(paste_patch(&holed, &patch, (100, 0)), holed);
    assert_eq!(paste_patch(&holed, &patch, (0, -20)), holed);
}

fn naive_flood(img: &CanvasImage, seed: (u32, u32)) -> Bitmap {
    let (w, h) = img.dims();
    let target = img.pixel(seed.0, seed.1);
    let mut out = Bitmap::new(w, h);
    let mut stack = vec![seed];
    while let Some((x, y)) = stack.pop() {
        if out.get(x, y) || img.pixel(x, y) != target {
            continue;
        }
        out.set(x, y, true);
        if x > 0 {
            stack.push((x - 1, y));
        }
        if y > 0 {
            stack.push((x, y - 1));
        }
        if x + 1 < w {
            stack.push((x + 1, y));
        }
        if y + 1 < h {
            stack.push((x, y + 1));
        }
    }
    out
}

#[test]
fn flood_fill_matches_naive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let palette = [Rgb(0, 0, 0), Rgb(255, 0, 0), Rgb(0, 255, 0)];
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(1..40u32), rng.gen_range(1..40u32));
        let px = (0..w * h).flat_map(|_| palette[rng.gen_range(0..3)].rgba()).collect();
        let img = CanvasImage::new(w, h, px).unwrap();
        let seed = (rng.gen_range(0..w), rng.gen_range(0..h));
        assert_eq!(flood_fill(&img, seed).decode(), naive_flood(&img, seed));
    }
}

#[test]
fn centroid_rounds_half_up() {
    // pixels 0 and 1 of a row: mean x 0.5 rounds to 1
    let m = RleMask::from_counts(4, 1, vec![0, 2, 2]).unwrap();
    assert_eq!(mask_centroid(&m), Some((1, 0)));
    assert_eq!(mask_centroid(&RleMask::empty(4, 1)), None);
}

#[test]
fn grounded_inpaint_of_disjoint_boxes_commutes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let img = random_image(&mut rng, 32, 24);
        let x = rng.gen_range(0.0..0.4);
        let a = BoundingBox::new(x, 0.1, x + 0.1, 0.4).unwrap();
        let b = BoundingBox::new(x + 0.2, 0.5, x + 0.5, 0.9).unwrap();
        let spec = |c: Vec<&str>, bx: Vec<BoundingBox>| {
            InpaintRequest::Grounded(
                bind_concepts_to_boxes(c.into_iter().map(String::from).collect(), bx).unwrap(),
            )
        };
        let ab = mock_inpaint(&img, &spec(vec!["bat", "ghost"], vec![a, b])).unwrap();
        let ba = mock_inpaint(&img, &spec(vec!["ghost", "bat"], vec![b, a])).unwrap();
        assert_eq!(ab, ba);
    }
}
