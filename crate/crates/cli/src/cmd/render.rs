use std::path::PathBuf;

use clap::Args;
use image::{Rgb, RgbImage};
use panoptic::PanopticMap;

use crate::error::{CliError, CliResult};
use crate::files::{load_panoptic, load_spec, manifest_path_for, timed, RunManifest};

/// Renders a panoptic map as an RGB PNG.
#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Panoptic map (`.rten`, 2 int32 channels).
    #[arg(long)]
    pub input: PathBuf,
    /// Dataset spec JSON; when given, the map is validated against it and
    /// ignore pixels are drawn black.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
}

/// Class colors, cycled by class id.
pub const PALETTE: [[u8; 3]; 66] = [
    [242, 36, 36], [97, 139, 242], [146, 242, 12], [191, 29, 171], [77, 191, 172], [191, 108, 10],
    [78, 33, 217], [92, 217, 87], [217, 11, 80], [36, 165, 242], [230, 242, 97], [194, 12, 242],
    [29, 191, 110], [191, 100, 77], [10, 25, 191], [102, 217, 33], [217, 87, 174], [11, 209, 217],
    [242, 190, 36], [163, 97, 242], [12, 242, 50], [191, 29, 49], [77, 125, 191], [139, 191, 10],
    [216, 33, 217], [87, 217, 178], [217, 96, 11], [61, 36, 242], [122, 242, 97], [242, 12, 118],
    [29, 151, 191], [191, 186, 77], [130, 10, 191], [33, 217, 101], [217, 97, 87], [11, 55, 217],
    [140, 242, 36], [242, 97, 213], [12, 242, 222], [191, 129, 29], [114, 77, 191], [10, 191, 16],
    [217, 33, 80], [87, 158, 217], [184, 217, 11], [215, 36, 242], [97, 242, 181], [242, 78, 12],
    [29, 30, 191], [111, 191, 77], [191, 10, 117], [33, 195, 217], [217, 194, 87], [121, 11, 217],
    [36, 242, 86], [242, 97, 104], [12, 90, 242], [131, 191, 29], [191, 77, 183], [10, 191, 152],
    [217, 123, 33], [113, 87, 217], [30, 217, 11], [242, 36, 115], [97, 195, 242], [235, 242, 12],
];

const IGNORE_COLOR: [u8; 3] = [0, 0, 0];

/// Brightness factor in [0.55, 1.0] for an instance id, from a SplitMix64
/// hash so that neighboring ids get unrelated shades.
pub fn brightness(id: i32) -> f64 {
    let mut z = (id as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    0.55 + 0.45 * (z % 64) as f64 / 63.0
}

pub fn color(class: i32, instance: i32) -> [u8; 3] {
    let base = PALETTE[class.rem_euclid(PALETTE.len() as i32) as usize];
    if instance == 0 {
        return base;
    }
    let f = brightness(instance);
    base.map(|c| (c as f64 * f).round() as u8)
}

pub fn render(map: &PanopticMap, is_ignore: impl Fn(i32) -> bool) -> RgbImage {
    let w = map.width();
    RgbImage::from_fn(w as u32, map.height() as u32, |x, y| {
        let i = y as usize * w + x as usize;
        let (c, id) = (map.semantic_plane()[i], map.instance_plane()[i]);
        Rgb(if is_ignore(c) { IGNORE_COLOR } else { color(c, id) })
    })
}

pub fn run(args: &RenderArgs) -> CliResult<()> {
    let map = load_panoptic("panoptic map", &args.input)?;
    let mut manifest = RunManifest::new("render");
    manifest.input("panoptic", &args.input);
    let spec = match &args.spec {
        Some(path) => {
            manifest.input("spec", path);
            let spec = load_spec(path)?;
            map.validate(&spec)
                .map_err(|e| CliError::from_lib(&format!("panoptic map ({})", args.input.display()), e))?;
            Some(spec)
        }
        None => {
            if let Some(i) = (0..map.len()).find(|&i| map.semantic_plane()[i] < 0 || map.instance_plane()[i] < 0) {
                return Err(CliError::Malformed(format!(
                    "panoptic map ({}): negative label at pixel {i}",
                    args.input.display()
                )));
            }
            None
        }
    };
    let (img, ms) = timed(|| render(&map, |c| spec.as_ref().is_some_and(|s| s.is_ignore(c))));
    manifest.time("render", ms);
    img.save_with_format(&args.out, image::ImageFormat::Png)
        .map_err(|e| CliError::output(&args.out, e))?;
    manifest.output("png", &args.out);
    manifest.write(&manifest_path_for(&args.out))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
