//! `despeckle`: restore an intensity image with a trained checkpoint.
//! Images larger than the tile size go through overlap-blended tiling.

use super::CommonArgs;
use crate::io::{image_file, pgm, Manifest};
use crate::nn::checkpoint;
use crate::pipeline::{despeckle_image, despeckle_tiled};
use crate::speckle::DEFAULT_LOG_FLOOR;
use crate::{Error, Result};

const KEYS: &[&str] = &["seed", "checkpoint", "input", "tile", "log_floor", "preview"];

pub fn run(args: &CommonArgs) -> Result<()> {
    let (cfg, seed) = super::load_config(args)?;
    cfg.restrict(KEYS)?;
    let ckpt_path = cfg.require_path("checkpoint")?;
    let input_path = cfg.require_path("input")?;
    let tile = cfg.get_parsed("tile", 256usize)?;
    let log_floor = cfg.get_parsed("log_floor", DEFAULT_LOG_FLOOR)?;
    let preview = cfg.get_bool("preview", false)?;

    let (params, _, _) = checkpoint::load(&ckpt_path)?;
    let input = image_file::read_image(&input_path)?;
    let output = if tile > 0 && (input.width() > tile || input.height() > tile) {
        despeckle_tiled(&params, &input, log_floor, tile)?
    } else {
        despeckle_image(&params, &input, log_floor)?
    };

    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stem = input_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string();
    let mut manifest = Manifest::new("despeckle", seed, cfg.hash());
    let int_path = out.join(format!("{stem}_despeckled.s2s1"));
    image_file::write_image(&int_path, &output.intensity)?;
    manifest.push(&int_path, out);
    let amp_path = out.join(format!("{stem}_amplitude.s2s1"));
    image_file::write_image(&amp_path, &output.amplitude)?;
    manifest.push(&amp_path, out);
    if preview {
        let p = out.join(format!("{stem}_despeckled.pgm"));
        pgm::write_pgm(&p, &output.amplitude, 0.01, 0.99)?;
        manifest.push(&p, out);
    }
    manifest.write(out)?;
    println!(
        "despeckle: restored {} -> {}",
        input_path.display(),
        int_path.display()
    );
    Ok(())
}
