//! Deterministic synthetic sequences. All texture comes from an integer
//! hash over world coordinates, so translated crops match exactly and any
//! seed reproduces the same bytes on every run.

use std::io::Write;
use std::path::Path;

use regionrc_core::yuv::{FrameY, Plane, VideoSpec};

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn hash2(x: i64, y: i64, seed: u64) -> u64 {
    mix(seed ^ mix(x as u64).wrapping_add(mix((y as u64).wrapping_mul(0xA24BAED4963EE407))))
}

/// White noise in 0..=255 at a world coordinate.
fn noise_u8(x: i64, y: i64, seed: u64) -> u8 {
    (hash2(x, y, seed) >> 24) as u8
}

/// Noise centered on zero with range about ±amp.
fn centered_noise(x: i64, y: i64, seed: u64, amp: u8) -> i64 {
    if amp == 0 {
        return 0;
    }
    let span = 2 * amp as i64 + 1;
    noise_u8(x, y, seed) as i64 * span / 256 - amp as i64
}

/// Triangle wave in 0..=amp with the given half-period; the smooth,
/// low-detail background everything else is drawn over.
fn tri(v: i64, half_period: i64, amp: i64) -> i64 {
    let p = half_period.max(1);
    let m = ((v % (2 * p)) + 2 * p) % (2 * p);
    (m - p).abs() * amp / p
}

/// Reflect `p` into [lo, hi] (ping-pong), keeping objects inside the frame.
fn fold(p: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let span = hi - lo;
    let m = (p - lo).rem_euclid(2.0 * span);
    lo + if m <= span { m } else { 2.0 * span - m }
}

/// A rigid textured rectangle on a reflected linear trajectory, with
/// optional per-frame interior noise so motion compensation never becomes
/// exact.
#[derive(Debug, Clone)]
pub struct Object {
    pub size: (usize, usize),
    pub start: (f64, f64),
    pub vel: (f64, f64),
    pub amp: u8,
    pub noise: u8,
}

/// A horizontal strip of strong static texture with optional per-frame
/// wobble: high detail, little motion.
#[derive(Debug, Clone)]
pub struct Band {
    pub rows: (usize, usize),
    pub amp: u8,
    pub wobble: u8,
}

/// Scene description for [`layered`].
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub seed: u64,
    pub pan: (f64, f64),
    pub band: Option<Band>,
    pub objects: Vec<Object>,
    /// Peak per-frame step of the drifting floor lighting; 0 disables it.
    pub flicker: u8,
}

/// Static per-pixel peak amplitude `cap / j` with `j` uniform in 1..=16: a
/// harmonic mixture whose tail thins like one over the threshold, so fresh
/// noise keeps responding smoothly across the whole quantizer ladder instead
/// of dying at one step.
fn harmonic_amp(x: i64, y: i64, seed: u64, cap: u8) -> u8 {
    if cap == 0 {
        return 0;
    }
    let j = 1 + hash2(x, y, seed) % 16;
    ((cap as u64 + j - 1) / j).max(1) as u8
}

/// Luminance offset of the drifting floor lighting for one 16-pixel tile: a
/// triangle ramp whose per-frame step is `cap / j` with `j` uniform in
/// 1..=16, so the refresh work the ramps force is spread over the whole
/// quantizer ladder. Total swing stays within about ±24.
fn flicker_offset(tx: i64, ty: i64, t: i64, cap: u8, seed: u64) -> i64 {
    if cap == 0 {
        return 0;
    }
    let h = hash2(tx, ty, seed ^ 0xF11C);
    let j = 1 + (h >> 8) % 16;
    let step = ((cap as u64 + j - 1) / j).max(1) as i64;
    let half = (48 / step).clamp(3, 24);
    let phase = ((h >> 40) % (2 * half as u64)) as i64;
    tri(t + phase, half, step * half) - step * half / 2
}

/// Render a scene: smooth gradient background (panned by `pan` per frame),
/// then the band, then the objects in frame coordinates.
pub fn layered(video: &VideoSpec, frames: usize, scene: &Scene) -> Vec<FrameY> {
    let (w, h) = (video.width, video.height);
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let shift_x = (scene.pan.0 * k as f64).round() as i64;
        let shift_y = (scene.pan.1 * k as f64).round() as i64;
        let frame_salt = mix(scene.seed ^ (k as u64).wrapping_mul(0xD6E8FEB86659FD93));
        let positions: Vec<(i64, i64)> = scene
            .objects
            .iter()
            .map(|o| {
                let px = fold(
                    o.start.0 + o.vel.0 * k as f64,
                    0.0,
                    (w - o.size.0) as f64,
                )
                .round() as i64;
                let py = fold(
                    o.start.1 + o.vel.1 * k as f64,
                    0.0,
                    (h - o.size.1) as f64,
                )
                .round() as i64;
                (px, py)
            })
            .collect();
        let mut data = vec![0u8; w * h];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let wx = x + shift_x;
                let wy = y + shift_y;
                let mut v = 90
                    + tri(wx, 48, 30)
                    + tri(wy, 64, 25)
                    + flicker_offset(x / 16, y / 16, k as i64, scene.flicker, scene.seed);
                if let Some(band) = &scene.band {
                    if wy >= band.rows.0 as i64 && wy < band.rows.1 as i64 {
                        let wamp = harmonic_amp(x, y, scene.seed ^ 0x0B0B, band.wobble);
                        v = 128
                            + centered_noise(wx, wy, scene.seed ^ 0xBA4D, band.amp)
                            + centered_noise(x, y, frame_salt ^ 0x0B0B, wamp);
                    }
                }
                for (i, o) in scene.objects.iter().enumerate() {
                    let (px, py) = positions[i];
                    if x >= px
                        && x < px + o.size.0 as i64
                        && y >= py
                        && y < py + o.size.1 as i64
                    {
                        v = 128
                            + centered_noise(
                                x - px,
                                y - py,
                                scene.seed ^ 0x0B0E ^ ((i as u64) << 8),
                                o.amp,
                            )
                            + centered_noise(x, y, frame_salt ^ (i as u64), o.noise);
                    }
                }
                data[(y as usize) * w + x as usize] = v.clamp(0, 255) as u8;
            }
        }
        out.push(FrameY::new(k, Plane::from_data(w, h, data)));
    }
    out
}

/// Pure global translation of a white-noise world: frame k samples the
/// world at offset k * shift, so consecutive frames are exact translations
/// of each other with no border fill.
pub fn translating(video: &VideoSpec, frames: usize, shift: (i32, i32), seed: u64) -> Vec<FrameY> {
    let (w, h) = (video.width, video.height);
    (0..frames)
        .map(|k| {
            let ox = k as i64 * shift.0 as i64;
            let oy = k as i64 * shift.1 as i64;
            let mut data = vec![0u8; w * h];
            for y in 0..h {
                for x in 0..w {
                    data[y * w + x] = noise_u8(x as i64 + ox, y as i64 + oy, seed);
                }
            }
            FrameY::new(k, Plane::from_data(w, h, data))
        })
        .collect()
}

/// Identical textured frames.
pub fn frozen(video: &VideoSpec, frames: usize, seed: u64) -> Vec<FrameY> {
    let first = layered(
        video,
        1,
        &Scene {
            seed,
            band: Some(Band {
                rows: (video.height / 3, 2 * video.height / 3),
                amp: 120,
                wobble: 0,
            }),
            ..Scene::default()
        },
    );
    (0..frames)
        .map(|k| FrameY::new(k, first[0].luma.clone()))
        .collect()
}

/// Identical constant-gray frames.
pub fn flat(video: &VideoSpec, frames: usize, level: u8) -> Vec<FrameY> {
    (0..frames)
        .map(|k| {
            FrameY::new(
                k,
                Plane::from_data(
                    video.width,
                    video.height,
                    vec![level; video.width * video.height],
                ),
            )
        })
        .collect()
}

/// Quiet scene that turns busy in its bottom third from `start_frame` on:
/// late activity concentrated in the last macroblock rows.
pub fn burst(video: &VideoSpec, frames: usize, start_frame: usize, seed: u64) -> Vec<FrameY> {
    let (w, h) = (video.width, video.height);
    let quiet = layered(
        video,
        frames,
        &Scene {
            seed,
            band: Some(Band {
                rows: (h / 4, h / 2),
                amp: 80,
                wobble: 0,
            }),
            ..Scene::default()
        },
    );
    quiet
        .into_iter()
        .enumerate()
        .map(|(k, mut f)| {
            if k >= start_frame {
                let t = (k - start_frame) as i64;
                let salt = mix(seed ^ (k as u64).wrapping_mul(0x2545F4914F6CDD1D));
                for y in (2 * h / 3)..h {
                    for x in 0..w {
                        let v = 128
                            + centered_noise(x as i64 + 3 * t, y as i64 + t, seed ^ 0xFEED, 100)
                            + centered_noise(x as i64, y as i64, salt, 10);
                        f.luma.data[y * w + x] = v.clamp(0, 255) as u8;
                    }
                }
            }
            f
        })
        .collect()
}

pub fn qcif(frame_count: usize) -> VideoSpec {
    VideoSpec::new(176, 144, 15.0, frame_count).unwrap()
}

/// Two large textured movers over a wobbling band and a quiet floor, with
/// mild sensor noise everywhere.
pub fn office(frames: usize, seed: u64) -> Vec<FrameY> {
    let video = qcif(frames.max(1));
    let mut out = layered(
        &video,
        frames,
        &Scene {
            seed,
            pan: (0.0, 0.0),
            band: Some(Band {
                rows: (48, 96),
                amp: 95,
                wobble: 24,
            }),
            objects: vec![
                Object {
                    size: (48, 48),
                    start: (8.0, 12.0),
                    vel: (1.6, 0.6),
                    amp: 160,
                    noise: 4,
                },
                Object {
                    size: (48, 48),
                    start: (116.0, 84.0),
                    vel: (-1.3, 0.8),
                    amp: 160,
                    noise: 4,
                },
            ],
            flicker: 12,
        },
    );
    dither(&mut out, 20, seed ^ 0x0FF1CE);
    out
}

/// Slow camera pan over detailed scenery plus one mover: global motion
/// dominates.
pub fn pan(frames: usize, seed: u64) -> Vec<FrameY> {
    let video = qcif(frames.max(1));
    let mut out = layered(
        &video,
        frames,
        &Scene {
            seed,
            pan: (1.0, 0.0),
            band: Some(Band {
                rows: (32, 88),
                amp: 90,
                wobble: 20,
            }),
            objects: vec![Object {
                size: (48, 48),
                start: (80.0, 92.0),
                vel: (1.4, -0.7),
                amp: 160,
                noise: 4,
            }],
            flicker: 12,
        },
    );
    dither(&mut out, 20, seed ^ 0x9A4);
    out
}

/// Three movers and a wide wobbling band: the hardest of the bundled clips.
pub fn busy(frames: usize, seed: u64) -> Vec<FrameY> {
    let video = qcif(frames.max(1));
    let mut out = layered(
        &video,
        frames,
        &Scene {
            seed,
            pan: (0.0, 0.0),
            band: Some(Band {
                rows: (40, 104),
                amp: 105,
                wobble: 28,
            }),
            objects: vec![
                Object {
                    size: (48, 48),
                    start: (8.0, 8.0),
                    vel: (2.1, 1.1),
                    amp: 165,
                    noise: 5,
                },
                Object {
                    size: (40, 40),
                    start: (128.0, 24.0),
                    vel: (-1.6, 1.4),
                    amp: 165,
                    noise: 5,
                },
                Object {
                    size: (48, 48),
                    start: (64.0, 88.0),
                    vel: (1.2, -1.6),
                    amp: 150,
                    noise: 4,
                },
            ],
            flicker: 12,
        },
    );
    dither(&mut out, 20, seed ^ 0xB5);
    out
}

/// Gentle scene: a narrow mild band and one slow textured mover over a quiet
/// floor, still lightly dithered so every frame carries some residual.
pub fn calm(frames: usize, seed: u64) -> Vec<FrameY> {
    let video = qcif(frames.max(1));
    let mut out = layered(
        &video,
        frames,
        &Scene {
            seed,
            pan: (0.0, 0.0),
            band: Some(Band {
                rows: (56, 88),
                amp: 70,
                wobble: 20,
            }),
            objects: vec![Object {
                size: (48, 48),
                start: (48.0, 48.0),
                vel: (0.9, 0.5),
                amp: 150,
                noise: 4,
            }],
            flicker: 10,
        },
    );
    dither(&mut out, 16, seed ^ 0xCA1);
    out
}

/// Overlay fresh per-frame sensor-like noise on every pixel. Each pixel has
/// a fixed peak amplitude of `amp / j` with `j` drawn uniformly from 1..=16,
/// so most pixels flicker gently while a sprinkling swing hard; the mixture
/// gives quiet areas residual energy at every quantizer step instead of one
/// shared die-off point.
pub fn dither(frames: &mut [FrameY], amp: u8, seed: u64) {
    if amp == 0 {
        return;
    }
    for frame in frames {
        let frame_seed = mix(seed ^ (frame.index as u64).wrapping_mul(0xD1B54A32D192ED03));
        let w = frame.luma.width;
        for (i, v) in frame.luma.data.iter_mut().enumerate() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let a = harmonic_amp(x, y, seed ^ 0x5A17, amp);
            *v = (*v as i64 + centered_noise(x, y, frame_seed, a)).clamp(0, 255) as u8;
        }
    }
}

/// Write frames as raw I420: the luma plane followed by both chroma planes
/// pinned to mid-gray.
pub fn write_i420(path: &Path, frames: &[FrameY]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    for frame in frames {
        f.write_all(&frame.luma.data)?;
        f.write_all(&vec![128u8; frame.luma.width * frame.luma.height / 2])?;
    }
    Ok(())
}
