//! Binary PGM (P5, maxval 255) image grids.
//!
//! Images are tiled row-major with [`SEPARATOR`]-pixel gaps filled with
//! [`SEPARATOR_VALUE`]; unused trailing cells stay black. The header carries
//! a `# images N` comment so a grid can be split back into its images.

use std::path::Path;

use crate::dataio::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::models::{IMAGE_PIXELS, IMAGE_SIDE};

pub const SEPARATOR: usize = 2;
pub const SEPARATOR_VALUE: u8 = 128;

/// Width and height in pixels of a grid of `n` images in `cols` columns.
pub fn grid_dimensions(n: usize, cols: usize) -> (usize, usize) {
    let cols = cols.min(n).max(1);
    let rows = n.div_ceil(cols);
    let extent = |k: usize| k * IMAGE_SIDE + k.saturating_sub(1) * SEPARATOR;
    (extent(cols), extent(rows))
}

fn to_byte(p: f64) -> Result<u8> {
    if !p.is_finite() {
        return Err(Error::Domain(format!("pixel {p} is not finite")));
    }
    Ok((255.0 * p.clamp(0.0, 1.0)).round() as u8)
}

pub fn encode_image_grid<S: AsRef<[f64]>>(images: &[S], cols: usize) -> Result<Vec<u8>> {
    if images.is_empty() {
        return Err(Error::SampleSize("image grid needs at least one image".into()));
    }
    if cols == 0 {
        return Err(Error::Shape("image grid needs at least one column".into()));
    }
    let cols = cols.min(images.len());
    let (width, height) = grid_dimensions(images.len(), cols);
    let mut raster = vec![SEPARATOR_VALUE; width * height];
    let rows = images.len().div_ceil(cols);
    for cell in 0..rows * cols {
        let (r, c) = (cell / cols, cell % cols);
        let (x0, y0) = (c * (IMAGE_SIDE + SEPARATOR), r * (IMAGE_SIDE + SEPARATOR));
        let image = images.get(cell).map(AsRef::as_ref);
        if let Some(img) = image {
            if img.len() != IMAGE_PIXELS {
                return Err(Error::Shape(format!("image {cell} has {} pixels, expected {IMAGE_PIXELS}", img.len())));
            }
        }
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                let v = match image {
                    Some(img) => to_byte(img[y * IMAGE_SIDE + x])?,
                    None => 0,
                };
                raster[(y0 + y) * width + x0 + x] = v;
            }
        }
    }
    let mut out = format!("P5\n# images {}\n{width} {height}\n255\n", images.len()).into_bytes();
    out.extend_from_slice(&raster);
    Ok(out)
}

pub fn save_image_grid<S: AsRef<[f64]>>(images: &[S], cols: usize, path: &Path) -> Result<()> {
    write_atomic(path, &encode_image_grid(images, cols)?)
}

/// A decoded P5 file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub comments: Vec<String>,
    pub pixels: Vec<u8>,
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize, comments: &mut Vec<String>) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            comments.push(String::from_utf8_lossy(&bytes[pos + 1..end]).trim().to_string());
            pos = end;
        } else {
            return pos;
        }
    }
}

fn header_number(bytes: &[u8], pos: &mut usize, comments: &mut Vec<String>, what: &str) -> Result<usize> {
    *pos = skip_space_and_comments(bytes, *pos, comments);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("PGM {what} is missing or malformed")))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Graymap> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::Format("not a binary PGM (P5) file".into()));
    }
    let mut pos = 2;
    let mut comments = Vec::new();
    let width = header_number(bytes, &mut pos, &mut comments, "width")?;
    let height = header_number(bytes, &mut pos, &mut comments, "height")?;
    let maxval = header_number(bytes, &mut pos, &mut comments, "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval {maxval}, expected 255")));
    }
    if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(Error::Format("PGM header must end with one whitespace byte".into()));
    }
    let body = &bytes[pos + 1..];
    let expected = width.checked_mul(height).ok_or_else(|| Error::Length("PGM dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Length(format!(
            "PGM raster has {} bytes, {width}x{height} needs {expected}",
            body.len()
        )));
    }
    Ok(Graymap {
        width,
        height,
        comments,
        pixels: body.to_vec(),
    })
}

/// Splits a grid written by [`encode_image_grid`] back into images with
/// pixels `byte / 255`.
pub fn parse_image_grid(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let g = parse_pgm(bytes)?;
    let cells = |extent: usize| {
        let k = (extent + SEPARATOR) / (IMAGE_SIDE + SEPARATOR);
        (k > 0 && k * IMAGE_SIDE + (k - 1) * SEPARATOR == extent).then_some(k)
    };
    let (Some(cols), Some(rows)) = (cells(g.width), cells(g.height)) else {
        return Err(Error::Format(format!("{}x{} is not an image grid", g.width, g.height)));
    };
    let declared = g.comments.iter().find_map(|c| c.strip_prefix("images ").and_then(|n| n.trim().parse().ok()));
    let count: usize = declared.unwrap_or(rows * cols);
    if count == 0 || count > rows * cols || count.div_ceil(cols) != rows {
        return Err(Error::Format(format!("{count} images do not fit a {rows}x{cols} grid")));
    }
    Ok((0..count)
        .map(|cell| {
            let (x0, y0) = ((cell % cols) * (IMAGE_SIDE + SEPARATOR), (cell / cols) * (IMAGE_SIDE + SEPARATOR));
            (0..IMAGE_PIXELS)
                .map(|i| f64::from(g.pixels[(y0 + i / IMAGE_SIDE) * g.width + x0 + i % IMAGE_SIDE]) / 255.0)
                .collect()
        })
        .collect())
}

pub fn load_image_grid(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_image_grid(&read_file(path)?)
}
