//! `MSIB` band-stack raster.
//!
//! ```text
//! magic     4 bytes "MSIB"
//! version   u16 LE  1
//! width     u32 LE
//! height    u32 LE
//! channels  u16 LE
//! dtype     u8      0 = f32 LE
//! reserved  u8      0
//! channels × { name_len u8, name UTF-8 }
//! height × width × channels f32 LE, (row, col, channel) order
//! ```

use std::path::Path;

use super::MultiSpectralImage;
use crate::bytes::{read_file, write_file, ByteReader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MSIB";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

pub fn encode_msib(img: &MultiSpectralImage) -> Result<Vec<u8>> {
    let too_big = |what: &str| Error::Config(format!("image {what} does not fit the MSIB header"));
    let width = u32::try_from(img.width).map_err(|_| too_big("width"))?;
    let height = u32::try_from(img.height).map_err(|_| too_big("height"))?;
    let channels = u16::try_from(img.channels()).map_err(|_| too_big("band count"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + img.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.push(0);
    out.push(0);
    for name in &img.bands {
        let len = u8::try_from(name.len()).map_err(|_| too_big("band name"))?;
        out.push(len);
        out.extend_from_slice(name.as_bytes());
    }
    for v in &img.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_msib(bytes: &[u8], origin: &Path) -> Result<MultiSpectralImage> {
    let mut r = ByteReader::new(bytes, origin);
    if r.take(4)? != MAGIC {
        return Err(Error::BadMagic(origin.to_path_buf()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: origin.to_path_buf(),
            version,
        });
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let channels = r.u16()? as usize;
    let dtype = r.u8()?;
    let _reserved = r.u8()?;
    if dtype != 0 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            msg: format!("unsupported dtype {dtype}"),
        });
    }
    let bands = (0..channels)
        .map(|_| {
            let n = r.u8()? as usize;
            r.utf8(n)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = r.f32s(width * height * channels)?;
    if r.remaining() != 0 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            msg: format!("{} trailing bytes", r.remaining()),
        });
    }
    MultiSpectralImage::new(width, height, bands, values).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn write_msib(img: &MultiSpectralImage, path: &Path) -> Result<()> {
    write_file(path, &encode_msib(img)?)
}

pub fn read_msib(path: &Path) -> Result<MultiSpectralImage> {
    decode_msib(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn six_band(w: usize, h: usize, values: Vec<f32>) -> MultiSpectralImage {
        let bands = ["blue", "green", "red", "nir", "swir1", "swir2"]
            .map(String::from)
            .to_vec();
        MultiSpectralImage::new(w, h, bands, values).unwrap()
    }

    #[test]
    fn single_pixel_layout() {
        let img = MultiSpectralImage::new(1, 1, vec!["b".into()], vec![0.5]).unwrap();
        let bytes = encode_msib(&img).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2 + 4);
        assert_eq!(&bytes[..4], b"MSIB");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[16..18], &[0, 0]);
        assert_eq!(&bytes[18..20], &[1, b'b']);
        assert_eq!(&bytes[20..], &0.5f32.to_le_bytes());
    }

    #[test]
    fn channel_field() {
        let img = six_band(2, 1, vec![0.0; 12]);
        let bytes = encode_msib(&img).unwrap();
        assert_eq!(u16::from_le_bytes([bytes[14], bytes[15]]), 6);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 1);
    }

    #[test]
    fn rejects_bad_files() {
        let img = six_band(2, 2, vec![0.25; 24]);
        let bytes = encode_msib(&img).unwrap();
        let p = Path::new("x.msib");
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"MSIX");
        assert!(matches!(decode_msib(&bad, p), Err(Error::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            decode_msib(&bad, p),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));
        assert!(matches!(
            decode_msib(&bytes[..bytes.len() - 3], p),
            Err(Error::TruncatedFile(_))
        ));
        assert!(matches!(decode_msib(&bytes[..10], p), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.msib");
        let img = six_band(3, 2, (0..36).map(|i| i as f32 / 36.0).collect());
        write_msib(&img, &path).unwrap();
        assert_eq!(read_msib(&path).unwrap(), img);
        assert!(matches!(
            read_msib(&dir.path().join("missing.msib")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            (w, h, values) in (1usize..5, 1usize..5).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), w * h * 6))
            })
        ) {
            let img = six_band(w, h, values);
            let back = decode_msib(&encode_msib(&img).unwrap(), Path::new("m")).unwrap();
            let bits = |i: &MultiSpectralImage| i.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&img));
            prop_assert_eq!(back.bands, img.bands);
        }
    }
}
