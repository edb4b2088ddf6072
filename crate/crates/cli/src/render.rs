use std::fs;
use std::path::Path;

use borderforge::detect::{detect_with_details, DetectionOutcome};
use borderforge::eval::RunOptions;
use borderforge::scenario::{load_scenario, ScriptRunner};
use borderforge::scene::RenderedFrame;
use borderforge::sim::Simulation;
use image::{Rgb, RgbImage};

use crate::{CliError, Verdict};

const REJECTED: [u8; 3] = [0, 200, 255];
const KEPT: [u8; 3] = [255, 220, 0];
const SELECTED: [u8; 3] = [0, 255, 0];
const CROSSHAIR: [u8; 3] = [255, 0, 255];

/// Replays the scenario's scripts and dumps every `every` seconds of
/// simulated time the camera frame as `frame_NNNNNN.png` (color) and
/// `frame_NNNNNN.pgm` (depth in millimeters, 16 bit).
pub fn render(
    scenario: &Path,
    out: &Path,
    seed: Option<u64>,
    dt: Option<f64>,
    every: f64,
    annotate: bool,
) -> Result<Verdict, CliError> {
    if !(every > 0.0 && every.is_finite()) {
        return Err(CliError::Usage(format!("--every must be positive, got {every}")));
    }
    let loaded = load_scenario(scenario)?;
    let options = RunOptions { seed, dt };
    let mut sim_config = loaded.file.sim.clone();
    if let Some(dt) = options.dt {
        sim_config.dt = dt;
    }
    sim_config.validate().map_err(CliError::Usage)?;
    let stride = ((every / sim_config.dt).round() as u64).max(1);
    let max_time = sim_config.max_time;
    let seed = options.seed.unwrap_or(loaded.file.seed);
    let mut sim = Simulation::new(loaded.setup(seed, sim_config));
    let mut runner = ScriptRunner::new(
        loaded.file.laser_script.clone(),
        loaded.file.event_script.clone(),
        loaded.prior.clone(),
    );
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let mut written = 0;
    while sim.time() < max_time - 1e-9 {
        runner.before_tick(&mut sim);
        let record = sim.step();
        if record.tick % stride == 0 {
            let name = format!("frame_{:06}", record.tick);
            let details = annotate.then(|| detect_with_details(sim.last_frame(), &loaded.file.detection));
            write_frame(out, &name, sim.last_frame(), details.as_ref())?;
            written += 1;
        }
        if runner.finished() {
            break;
        }
    }
    println!("{written} frames written to {}", out.display());
    Ok(Verdict::Passed)
}

fn write_frame(
    out: &Path,
    name: &str,
    frame: &RenderedFrame,
    details: Option<&DetectionOutcome>,
) -> Result<(), CliError> {
    let (w, h) = (frame.width as u32, frame.height as u32);
    let mut color = RgbImage::from_fn(w, h, |x, y| Rgb(frame.color[frame.index(x as usize, y as usize)]));
    if let Some(d) = details {
        overlay(&mut color, d);
    }
    let png = out.join(format!("{name}.png"));
    color.save(&png).map_err(|source| CliError::Image {
        path: png.clone(),
        source,
    })?;
    let pgm = out.join(format!("{name}.pgm"));
    fs::write(&pgm, depth_pgm(frame)).map_err(CliError::io(&pgm))?;
    Ok(())
}

/// Binary 16-bit PGM of the depth in millimeters, big-endian as the format requires.
fn depth_pgm(frame: &RenderedFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", frame.width, frame.height).into_bytes();
    for z in &frame.depth {
        let mm = (z * 1000.0).round().clamp(0.0, u16::MAX as f64) as u16;
        out.extend_from_slice(&mm.to_be_bytes());
    }
    out
}

/// Rejected blobs cyan, surviving blobs yellow, the selected blob green and
/// the refined point as a magenta crosshair.
fn overlay(img: &mut RgbImage, d: &DetectionOutcome) {
    let mut paint = |pixels: &[(usize, usize)], c: [u8; 3]| {
        for &(x, y) in pixels {
            img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    };
    for blob in &d.blobs {
        paint(&blob.pixels, REJECTED);
    }
    for (i, blob) in d.kept.iter().enumerate() {
        paint(&blob.pixels, if Some(i) == d.selected { SELECTED } else { KEPT });
    }
    if let Some(p) = d.point {
        let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
        for k in -8i64..=8 {
            if k.abs() < 3 {
                continue;
            }
            for (x, y) in [(cx + k, cy), (cx, cy + k)] {
                if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                    img.put_pixel(x as u32, y as u32, Rgb(CROSSHAIR));
                }
            }
        }
    }
}
