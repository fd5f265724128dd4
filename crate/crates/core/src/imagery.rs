//! In-memory raster types shared across modules.

/// Label value for pixels that carry no class (not traversed).
pub const BACKGROUND: u8 = 0;
/// Label value for pixels outside the world.
pub const VOID: u8 = 255;
/// RGB color drawn where a view extends beyond the world.
pub const VOID_RGB: [u8; 3] = [255, 0, 255];

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn is_void(&self, x: usize, y: usize) -> bool {
        self.pixel(x, y) == VOID_RGB
    }

    /// Copies the `w x h` window at `(x0, y0)`. Caller guarantees bounds.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RgbImage {
        let mut out = RgbImage::new(w, h);
        for y in 0..h {
            let src = ((y0 + y) * self.width + x0) * 3;
            let dst = y * w * 3;
            out.data[dst..dst + w * 3].copy_from_slice(&self.data[src..src + w * 3]);
        }
        out
    }
}

/// Per-pixel class labels: 0 = background, 1..=K = classes, 255 = void.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Class index (0-based) at a pixel, `None` for background and void.
    pub fn class_at(&self, x: usize, y: usize) -> Option<usize> {
        decode_label(self.get(x, y))
    }

    pub fn labeled_count(&self) -> usize {
        self.data.iter().filter(|&&v| decode_label(v).is_some()).count()
    }
}

/// Encodes a 0-based class index as a mask label.
pub fn encode_class(class: usize) -> u8 {
    debug_assert!(class < 254);
    class as u8 + 1
}

pub fn decode_label(v: u8) -> Option<usize> {
    match v {
        BACKGROUND | VOID => None,
        v => Some(v as usize - 1),
    }
}
