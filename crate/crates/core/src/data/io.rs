use std::fs;
use std::path::Path;

use super::{DataError, Dataset, Result, Sample};
use crate::data::synthetic::Split;

pub const DORD_MAGIC: &[u8; 4] = b"DORD";
pub const DORD_VERSION: u32 = 1;

/// Writes a split as `DORD` little-endian binary: magic, version, then
/// `K, per_class, C, H, W` as u32, then per sample `class u32, identity u32`
/// and `C·H·W` f32 pixels.
pub fn write_dord(path: &Path, data: &Dataset) -> Result<()> {
    data.check()?;
    let mut buf = Vec::with_capacity(28 + data.len() * (8 + 4 * data.pixels_per_image()));
    buf.extend_from_slice(DORD_MAGIC);
    let header = [
        DORD_VERSION,
        data.classes as u32,
        data.per_class as u32,
        data.image[0] as u32,
        data.image[1] as u32,
        data.image[2] as u32,
    ];
    for v in header {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for s in &data.samples {
        buf.extend_from_slice(&s.class.to_le_bytes());
        buf.extend_from_slice(&s.identity.to_le_bytes());
        for p in &s.pixels {
            buf.extend_from_slice(&p.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| DataError::Format(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn read_dord(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != DORD_MAGIC {
        return Err(DataError::Format("bad magic, expected DORD".into()));
    }
    let version = cur.u32()?;
    if version != DORD_VERSION {
        return Err(DataError::Format(format!("unsupported version {version}")));
    }
    let classes = cur.u32()? as usize;
    let per_class = cur.u32()? as usize;
    let image = [cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize];
    let n = image.iter().product::<usize>();
    let count = classes * per_class;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let class = cur.u32()?;
        let identity = cur.u32()?;
        let pixels: Vec<f32> = cur
            .take(4 * n)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(DataError::Format("non-finite pixel".into()));
        }
        samples.push(Sample {
            class,
            identity,
            pixels,
        });
    }
    if cur.pos != bytes.len() {
        return Err(DataError::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let data = Dataset {
        classes,
        per_class,
        image,
        samples,
    };
    data.check()?;
    Ok(data)
}

/// Reads a PNG as `[C, H, W]` pixels in `[0, 1]`; grayscale images give one
/// channel, anything with color gives three (alpha dropped).
pub fn read_png(path: &Path) -> Result<([usize; 3], Vec<f32>)> {
    let img = image::open(path).map_err(|e| DataError::Image(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let mut px = vec![0.0f32; 3 * h * w];
        for (x, y, p) in rgb.enumerate_pixels() {
            for c in 0..3 {
                px[(c * h + y as usize) * w + x as usize] = p.0[c] as f32 / 255.0;
            }
        }
        Ok(([3, h, w], px))
    } else {
        let px = img.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        Ok(([1, h, w], px))
    }
}

/// Writes `[1|3, H, W]` pixels in `[0, 1]` as an 8-bit PNG.
pub fn write_png(path: &Path, shape: [usize; 3], pixels: &[f32]) -> Result<()> {
    let [c, h, w] = shape;
    if !matches!(c, 1 | 3) || pixels.len() != c * h * w {
        return Err(DataError::Invalid(format!(
            "cannot write {} pixels of shape {shape:?} as png",
            pixels.len()
        )));
    }
    let byte = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let mut raw = vec![0u8; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                raw[(y * w + x) * c + ch] = byte(pixels[(ch * h + y) * w + x]);
            }
        }
    }
    let color = if c == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer(path, &raw, w as u32, h as u32, color)
        .map_err(|e| DataError::Image(format!("{}: {e}", path.display())))
}

/// Imports a directory with one subdirectory of PNG files per class.
/// Classes are numbered in name order; every class must hold the same
/// number of images of one common size. Identity equals class.
pub fn load_image_folder(root: &Path) -> Result<Dataset> {
    let mut class_dirs: Vec<_> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.len() < 2 {
        return Err(DataError::Image(format!("{}: need at least 2 class directories", root.display())));
    }
    let mut samples = Vec::new();
    let mut image: Option<[usize; 3]> = None;
    let mut per_class = None;
    for (k, dir) in class_dirs.iter().enumerate() {
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        if *per_class.get_or_insert(files.len()) != files.len() {
            return Err(DataError::Image(format!(
                "{}: {} images, other classes have {}",
                dir.display(),
                files.len(),
                per_class.unwrap_or(0)
            )));
        }
        for f in files {
            let (shape, pixels) = read_png(&f)?;
            if *image.get_or_insert(shape) != shape {
                return Err(DataError::Image(format!("{}: shape {shape:?} differs from {:?}", f.display(), image)));
            }
            samples.push(Sample {
                class: k as u32,
                identity: k as u32,
                pixels,
            });
        }
    }
    let per_class = per_class.unwrap_or(0);
    if per_class == 0 {
        return Err(DataError::Image(format!("{}: no PNG files", root.display())));
    }
    Ok(Dataset {
        classes: class_dirs.len(),
        per_class,
        image: image.expect("at least one image"),
        samples,
    })
}

/// Loads `split` from a dataset directory: `<split>.dord` if present,
/// otherwise a `<split>/` image folder.
pub fn load_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let bin = dir.join(format!("{}.dord", split.as_str()));
    if bin.is_file() {
        return read_dord(&bin);
    }
    let folder = dir.join(split.as_str());
    if folder.is_dir() {
        return load_image_folder(&folder);
    }
    Err(DataError::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no {} or {} directory", bin.display(), folder.display()),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SyntheticSpec};

    #[test]
    fn dord_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.dord");
        let data = generate(&SyntheticSpec::new(3, 4, [2, 5, 4], 1), Split::Train).unwrap();
        write_dord(&path, &data).unwrap();
        assert_eq!(read_dord(&path).unwrap(), data);
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"DORD");
        assert_eq!(bytes.len(), 28 + 12 * (8 + 4 * 40));
        assert_eq!(load_dir(dir.path(), Split::Train).unwrap(), data);
    }

    #[test]
    fn dord_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.dord");
        let data = generate(&SyntheticSpec::new(2, 4, [1, 3, 3], 1), Split::Train).unwrap();
        write_dord(&path, &data).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_dord(&path), Err(DataError::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(read_dord(&path), Err(DataError::Format(_))));
        let mut bad = bytes;
        bad[4] = 9;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(read_dord(&path), Err(DataError::Format(_))));
    }

    #[test]
    fn image_folder_import() {
        let dir = tempfile::tempdir().unwrap();
        for (k, name) in ["cat", "dog"].iter().enumerate() {
            let sub = dir.path().join(name);
            fs::create_dir(&sub).unwrap();
            for i in 0..2u8 {
                let img = image::GrayImage::from_fn(3, 2, |x, y| image::Luma([(k as u8) * 100 + i + (x + y) as u8]));
                img.save(sub.join(format!("{i}.png"))).unwrap();
            }
        }
        let d = load_image_folder(dir.path()).unwrap();
        assert_eq!((d.classes, d.per_class, d.image), (2, 2, [1, 2, 3]));
        assert_eq!(d.samples[2].class, 1);
        assert_eq!(d.samples[3].pixels[4], 103.0 / 255.0);
    }

    #[test]
    fn png_round_trip_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        for shape in [[1, 2, 3], [3, 2, 3]] {
            let n = shape.iter().product::<usize>();
            let px: Vec<f32> = (0..n).map(|i| (i * 13 % 256) as f32 / 255.0).collect();
            let path = dir.path().join(format!("{}.png", shape[0]));
            write_png(&path, shape, &px).unwrap();
            assert_eq!(read_png(&path).unwrap(), (shape, px));
        }
        assert!(write_png(&dir.path().join("x.png"), [2, 1, 1], &[0.0, 0.0]).is_err());
    }
}
