//! 8-bit grayscale image IO (PNG, PGM/PPM).

use std::path::Path;

use autothorax_core::imaging::GrayImage;

use crate::error::{Error, Result};

/// Decode an image file to grayscale. Color inputs are converted with
/// luma weights; 16-bit inputs are rejected.
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let dynamic = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => Error::Missing {
            what: "image",
            path: path.to_path_buf(),
        },
        other => img_err(other.to_string()),
    })?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let img = match dynamic {
        image::DynamicImage::ImageLuma8(g) => GrayImage::from_gray8(w, h, g.as_raw()),
        image::DynamicImage::ImageLumaA8(g) => {
            let luma: Vec<u8> = g.as_raw().chunks_exact(2).map(|p| p[0]).collect();
            GrayImage::from_gray8(w, h, &luma)
        }
        image::DynamicImage::ImageRgb8(rgb) => GrayImage::from_rgb8(w, h, rgb.as_raw()),
        image::DynamicImage::ImageRgba8(rgba) => {
            let rgb: Vec<u8> = rgba.as_raw().chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
            GrayImage::from_rgb8(w, h, &rgb)
        }
        other => return Err(img_err(format!("unsupported pixel format {:?}", other.color()))),
    };
    img.map_err(Error::from)
}

/// Write as 8-bit grayscale; the format follows the file extension.
pub fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_gray8())
        .expect("buffer matches dimensions");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
