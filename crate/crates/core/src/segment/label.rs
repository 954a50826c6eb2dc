//! Connected-component labeling of binary masks.

use serde::{Deserialize, Serialize};

use super::BinaryMask;

/// Pixel neighborhood used when growing components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

// Serialized as the numeral 4 or 8 so config files read naturally.
impl Serialize for Connectivity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        })
    }
}

impl<'de> Deserialize<'de> for Connectivity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match u8::deserialize(d)? {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(serde::de::Error::custom(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

/// Split a mask into its maximal connected components, one mask each,
/// ordered by descending pixel count (ties: earliest pixel in scan order
/// first). The returned masks are pairwise disjoint and their union is the
/// input.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<BinaryMask> {
    let w = mask.width();
    let h = mask.height();
    let mut visited = vec![false; w * h];
    let mut components: Vec<(usize, usize, BinaryMask)> = Vec::new();

    for start in 0..w * h {
        if visited[start] || !mask.bits()[start] {
            continue;
        }
        let mut component = BinaryMask::new(w, h);
        let mut stack = vec![start];
        visited[start] = true;
        let mut count = 0usize;
        while let Some(p) = stack.pop() {
            let (row, col) = (p / w, p % w);
            component.set(row, col, true);
            count += 1;
            for &(dr, dc) in connectivity.offsets() {
                let r = row as isize + dr;
                let c = col as isize + dc;
                if r < 0 || r >= h as isize || c < 0 || c >= w as isize {
                    continue;
                }
                let q = r as usize * w + c as usize;
                if !visited[q] && mask.bits()[q] {
                    visited[q] = true;
                    stack.push(q);
                }
            }
        }
        components.push((count, start, component));
    }

    components.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    components.into_iter().map(|(_, _, m)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(mask: &mut BinaryMask, r0: usize, c0: usize, size: usize) {
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                mask.set(r, c, true);
            }
        }
    }

    #[test]
    fn two_separate_blocks_give_two_components() {
        let mut mask = BinaryMask::new(12, 12);
        block(&mut mask, 1, 1, 3);
        block(&mut mask, 7, 7, 3);
        let comps = label_components(&mask, Connectivity::Eight);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].count(), 9);
        assert_eq!(comps[1].count(), 9);
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let mut mask = BinaryMask::new(8, 8);
        block(&mut mask, 0, 0, 2);
        block(&mut mask, 2, 2, 2);
        assert_eq!(label_components(&mask, Connectivity::Eight).len(), 1);
        assert_eq!(label_components(&mask, Connectivity::Four).len(), 2);
    }

    #[test]
    fn empty_mask_gives_no_components() {
        let mask = BinaryMask::new(8, 8);
        assert!(label_components(&mask, Connectivity::Eight).is_empty());
    }

    #[test]
    fn components_partition_the_mask() {
        let mut mask = BinaryMask::new(16, 16);
        block(&mut mask, 0, 0, 4);
        block(&mut mask, 6, 6, 2);
        block(&mut mask, 12, 1, 3);
        mask.set(15, 15, true);
        let comps = label_components(&mask, Connectivity::Eight);
        // Ordered by descending size.
        let sizes: Vec<usize> = comps.iter().map(|c| c.count()).collect();
        assert_eq!(sizes, vec![16, 9, 4, 1]);
        // Disjoint, and the union reproduces the input.
        let mut union = BinaryMask::new(16, 16);
        for comp in &comps {
            for (i, &b) in comp.bits().iter().enumerate() {
                if b {
                    assert!(!union.bits()[i], "components overlap at {i}");
                    union.set(i / 16, i % 16, true);
                }
            }
        }
        assert_eq!(union, mask);
    }

    #[test]
    fn connectivity_serde_uses_numerals() {
        let json = serde_json::to_string(&Connectivity::Eight).unwrap();
        assert_eq!(json, "8");
        let back: Connectivity = serde_json::from_str("4").unwrap();
        assert_eq!(back, Connectivity::Four);
        assert!(serde_json::from_str::<Connectivity>("5").is_err());
    }
}
