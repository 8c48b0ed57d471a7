#include "facetflow/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace facetflow {

namespace {
constexpr double kPosTol = 1e-12;

std::string loc(double s) {
  std::ostringstream os;
  os << "s=" << s;
  return os.str();
}
}  // namespace

Segment Segment::facet(double lo, double hi, double alpha) {
  Segment s;
  s.kind = Kind::facet;
  s.lo = lo;
  s.hi = hi;
  s.alpha = alpha;
  return s;
}

Segment Segment::smooth(std::vector<double> x, std::vector<double> phi) {
  Segment s;
  s.kind = Kind::smooth;
  if (x.size() < 2 || x.size() != phi.size())
    throw ConfigError("smooth segment needs matching node arrays of length >= 2");
  s.lo = x.front();
  s.hi = x.back();
  s.x = std::move(x);
  s.phi = std::move(phi);
  return s;
}

Profile::Profile(std::vector<Segment> segments, double base_height)
    : segments_(std::move(segments)), base_height_(base_height) {
  if (segments_.empty()) throw ConfigError("profile: no segments");
  for (const Segment& s : segments_) {
    if (!(s.hi >= s.lo)) throw ConfigError("profile: segment with hi < lo");
    if (s.kind == Segment::Kind::smooth) {
      for (std::size_t i = 1; i < s.x.size(); ++i)
        if (!(s.x[i] > s.x[i - 1]))
          throw ConfigError("profile: smooth nodes not strictly increasing");
    }
  }

  seg_w_.resize(segments_.size());
  node_w_.resize(segments_.size());
  double acc = base_height_;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    seg_w_[i] = acc;
    if (s.kind == Segment::Kind::facet) {
      acc += s.alpha * (s.hi - s.lo);
    } else {
      auto& nw = node_w_[i];
      nw.resize(s.x.size());
      nw[0] = acc;
      for (std::size_t k = 1; k < s.x.size(); ++k) {
        double dx = s.x[k] - s.x[k - 1];
        nw[k] = nw[k - 1] + 0.5 * (s.phi[k] + s.phi[k - 1]) * dx;
      }
      acc = nw.back();
    }
  }
  integral_phi_ = acc - base_height_;
}

int Profile::segment_at(double s) const {
  int lo = 0, hi = int(segments_.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (segments_[mid].lo <= s)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

double Profile::w(double s) const {
  if (s >= segments_.back().hi) return base_height_ + integral_phi_;
  int i = segment_at(s);
  const Segment& seg = segments_[i];
  if (seg.kind == Segment::Kind::facet) return seg_w_[i] + seg.alpha * (s - seg.lo);
  const auto& nw = node_w_[i];
  auto it = std::upper_bound(seg.x.begin(), seg.x.end(), s);
  int k = std::max<int>(1, int(it - seg.x.begin()));
  k = std::min<int>(k, int(seg.x.size()) - 1);
  double dx = seg.x[k] - seg.x[k - 1];
  double m = (seg.phi[k] - seg.phi[k - 1]) / dx;
  double d = s - seg.x[k - 1];
  return nw[k - 1] + seg.phi[k - 1] * d + 0.5 * m * d * d;
}

double Profile::phi_after(double s) const {
  int i = segment_at(s);
  const Segment& seg = segments_[i];
  if (seg.kind == Segment::Kind::facet) return seg.alpha;
  auto it = std::upper_bound(seg.x.begin(), seg.x.end(), s);
  int k = std::max<int>(1, int(it - seg.x.begin()));
  k = std::min<int>(k, int(seg.x.size()) - 1);
  double dx = seg.x[k] - seg.x[k - 1];
  double m = (seg.phi[k] - seg.phi[k - 1]) / dx;
  return seg.phi[k - 1] + m * (s - seg.x[k - 1]);
}

double Profile::phi_before(double s) const {
  if (s <= segments_.front().lo + kPosTol) s = segments_.back().hi;
  // Left limit: step just inside the segment ending at or containing s.
  int i = segment_at(s);
  const Segment& seg = segments_[i];
  if (std::fabs(s - seg.lo) <= kPosTol && i > 0) {
    const Segment& prev = segments_[i - 1];
    if (prev.kind == Segment::Kind::facet) return prev.alpha;
    return prev.phi.back();
  }
  if (seg.kind == Segment::Kind::facet) return seg.alpha;
  auto it = std::lower_bound(seg.x.begin(), seg.x.end(), s - kPosTol);
  int k = std::max<int>(1, int(it - seg.x.begin()));
  k = std::min<int>(k, int(seg.x.size()) - 1);
  if (std::fabs(s - seg.x[k]) <= kPosTol) return seg.phi[k];
  double dx = seg.x[k] - seg.x[k - 1];
  double m = (seg.phi[k] - seg.phi[k - 1]) / dx;
  return seg.phi[k - 1] + m * (s - seg.x[k - 1]);
}

SlopeInterval Profile::partial_w(double s) const {
  double left = (s <= kPosTol) ? phi_before(segments_.back().hi) - kTwoPi : phi_before(s);
  double right = phi_after(s);
  return SlopeInterval{std::min(left, right), std::max(left, right)};
}

std::vector<XiComponent> Profile::xi_components(const AnisotropyJ& J) const {
  std::vector<XiComponent> out;
  // Facet segments, merging touching pieces that carry the same corner.
  for (const Segment& s : segments_) {
    if (s.kind != Segment::Kind::facet) continue;
    auto hit = J.corner_near(s.alpha, 1e-9);
    XiComponent c;
    c.lo = s.lo;
    c.hi = s.hi;
    c.alpha = s.alpha;
    if (hit) {
      c.corner_index = hit->index;
      c.corner_period = hit->period;
    }
    if (!out.empty() && std::fabs(out.back().hi - c.lo) <= kPosTol &&
        std::fabs(out.back().alpha - c.alpha) <= 1e-9) {
      out.back().hi = c.hi;
    } else {
      out.push_back(c);
    }
  }
  // Wrap merge: last component ending at 2*pi continuing into the first.
  if (out.size() >= 2) {
    XiComponent& first = out.front();
    XiComponent& last = out.back();
    if (std::fabs(last.hi - kTwoPi) <= kPosTol && std::fabs(first.lo) <= kPosTol &&
        std::fabs(first.alpha + kTwoPi - last.alpha) <= 1e-9) {
      last.hi = first.hi + kTwoPi;
      out.erase(out.begin());
    }
  }

  // Junction points whose derivative interval reaches a corner that no facet
  // segment touching the point accounts for (kinks and tangential touches).
  // The wrap junction at s=0 only makes cyclic sense for closed data.
  const bool closed = std::fabs(integral_phi_ - kTwoPi * kPi) <= 1e-9;
  const int n = int(segments_.size());
  for (int i = 0; i < n; ++i) {
    double s = segments_[i].lo;
    if (i == 0 && !closed) continue;
    if (i > 0 && std::fabs(segments_[i - 1].lo - s) <= kPosTol) continue;  // not first at s
    SlopeInterval dw = partial_w(s);
    std::vector<double> covered;
    for (int j = i; j < n && std::fabs(segments_[j].lo - s) <= kPosTol; ++j)
      if (segments_[j].kind == Segment::Kind::facet) covered.push_back(segments_[j].alpha);
    for (int steps = 0; steps < n; ++steps) {
      int raw = i - 1 - steps;
      int jj = (raw % n + n) % n;
      double lift = (raw < 0) ? -kTwoPi : 0.0;
      if (std::fabs(segments_[jj].hi + lift - s) > kPosTol) break;
      if (segments_[jj].kind == Segment::Kind::facet)
        covered.push_back(segments_[jj].alpha + lift);
    }
    auto is_covered = [&](double alpha) {
      for (double c : covered)
        if (std::fabs(c - alpha) <= 1e-9) return true;
      return false;
    };
    auto hit = J.corner_above(dw.lo - 1e-9);
    while (hit.alpha <= dw.hi + 1e-9) {
      if (!is_covered(hit.alpha)) {
        XiComponent c;
        c.lo = c.hi = s;
        c.alpha = hit.alpha;
        c.corner_index = hit.index;
        c.corner_period = hit.period;
        out.push_back(c);
      }
      hit = (hit.index + 1 < J.size()) ? J.corner_hit(hit.index + 1, hit.period)
                                       : J.corner_hit(0, hit.period + 1);
    }
  }
  std::sort(out.begin(), out.end(), [](const XiComponent& a, const XiComponent& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.alpha < b.alpha;
  });
  return out;
}

int Profile::facet_count(const AnisotropyJ& J) const {
  return int(xi_components(J).size());
}

double Profile::tv_interval() const {
  double tv = 0;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.kind == Segment::Kind::smooth)
      for (std::size_t k = 1; k < s.phi.size(); ++k) tv += std::fabs(s.phi[k] - s.phi[k - 1]);
    if (i > 0) {
      double jump = phi_after(s.lo) - phi_before(s.lo);
      tv += std::fabs(jump);
    }
  }
  return tv;
}

double Profile::tv_cyclic() const {
  double wrap = std::remainder(phi_after(0.0) - phi_before(kTwoPi), kTwoPi);
  return tv_interval() + std::fabs(wrap);
}

double Profile::jr_norm(const AnisotropyJ& J) const {
  return tv_cyclic() + double(facet_count(J));
}

std::vector<std::string> Profile::validate(const AnisotropyJ& J) const {
  std::vector<std::string> bad;
  if (std::fabs(segments_.front().lo) > kPosTol)
    bad.push_back("coverage: first segment does not start at 0");
  if (std::fabs(segments_.back().hi - kTwoPi) > kPosTol)
    bad.push_back("coverage: last segment does not end at 2*pi");
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    if (std::fabs(segments_[i].lo - segments_[i - 1].hi) > kPosTol)
      bad.push_back("coverage: gap between segments at " + loc(segments_[i].lo));
  }
  for (const Segment& s : segments_) {
    if (s.kind == Segment::Kind::facet) {
      if (!J.corner_near(s.alpha, 1e-12))
        bad.push_back("facet slope is not a corner of J at " + loc(s.lo));
      continue;
    }
    // Interior corner hygiene of piecewise-linear smooth data.
    for (std::size_t k = 0; k + 1 < s.x.size(); ++k) {
      double v0 = s.phi[k], v1 = s.phi[k + 1];
      double lo = std::min(v0, v1), hi = std::max(v0, v1);
      auto hit = J.corner_above(lo + 1e-12);
      while (hit.alpha < hi - 1e-12) {
        bad.push_back("smooth segment crosses corner value in A off Xi near " + loc(s.x[k]));
        hit = (hit.index + 1 < J.size()) ? J.corner_hit(hit.index + 1, hit.period)
                                         : J.corner_hit(0, hit.period + 1);
      }
      if (std::fabs(v0 - v1) <= 1e-12 && J.corner_near(v0, 1e-12))
        bad.push_back("plateau at corner value not marked as facet at " + loc(s.x[k]));
    }
    for (std::size_t k = 1; k + 1 < s.x.size(); ++k) {
      if (J.corner_near(s.phi[k], 1e-12))
        bad.push_back("value in A off Xi: interior node touches corner at " + loc(s.x[k]));
    }
  }
  if (std::fabs(integral_phi_ - kTwoPi * kPi) > 1e-9)
    bad.push_back("periodicity: integral of phi over the circle is not 2*pi^2");
  return bad;
}

nlohmann::json Profile::to_json() const {
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment& s : segments_) {
    nlohmann::json j;
    if (s.kind == Segment::Kind::facet) {
      j["kind"] = "facet";
      j["lo"] = s.lo;
      j["hi"] = s.hi;
      j["alpha"] = s.alpha;
    } else {
      j["kind"] = "smooth";
      j["x"] = s.x;
      j["phi"] = s.phi;
    }
    segs.push_back(std::move(j));
  }
  return nlohmann::json{{"base_height", base_height_}, {"segments", segs}};
}

Profile Profile::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("segments") || !j.contains("base_height"))
    throw ConfigError("profile json: expected object with base_height and segments");
  std::vector<Segment> segs;
  for (const auto& js : j.at("segments")) {
    std::string kind = js.at("kind").get<std::string>();
    if (kind == "facet") {
      segs.push_back(Segment::facet(js.at("lo").get<double>(), js.at("hi").get<double>(),
                                    js.at("alpha").get<double>()));
    } else if (kind == "smooth") {
      segs.push_back(Segment::smooth(js.at("x").get<std::vector<double>>(),
                                     js.at("phi").get<std::vector<double>>()));
    } else {
      throw ConfigError("profile json: unknown segment kind '" + kind + "'");
    }
  }
  return Profile(std::move(segs), j.at("base_height").get<double>());
}

PiecewiseW::PiecewiseW(const Profile& p) {
  base_ = p.base_height();
  double acc = base_;
  for (const Segment& s : p.segments()) {
    if (s.kind == Segment::Kind::facet) {
      if (s.hi > s.lo) {
        pieces_.push_back(WPiece{s.lo, s.hi, acc, s.alpha, 0.0});
        acc += s.alpha * (s.hi - s.lo);
      }
      continue;
    }
    for (std::size_t k = 0; k + 1 < s.x.size(); ++k) {
      double dx = s.x[k + 1] - s.x[k];
      double m = (s.phi[k + 1] - s.phi[k]) / dx;
      pieces_.push_back(WPiece{s.x[k], s.x[k + 1], acc, s.phi[k], m});
      acc += 0.5 * (s.phi[k] + s.phi[k + 1]) * dx;
    }
  }
  if (pieces_.empty()) throw ConfigError("piecewise w: profile has no extent");
}

int PiecewiseW::piece_after(double x, long& lift) const {
  lift = long(std::floor(x / kTwoPi));
  double r = x - kTwoPi * double(lift);
  if (r < 0) {
    r += kTwoPi;
    --lift;
  } else if (r >= kTwoPi) {
    r -= kTwoPi;
    ++lift;
  }
  int lo = 0, hi = int(pieces_.size()) - 1;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (pieces_[mid].x0 <= r)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

int PiecewiseW::piece_before(double x, long& lift) const {
  int i = piece_after(x, lift);
  double r = x - kTwoPi * double(lift);
  if (r - pieces_[i].x0 <= kPosTol * std::max(1.0, std::fabs(r))) {
    if (i == 0) {
      --lift;
      return int(pieces_.size()) - 1;
    }
    return i - 1;
  }
  return i;
}

double PiecewiseW::w(double x) const {
  long lift;
  int i = piece_after(x, lift);
  double r = x - kTwoPi * double(lift);
  double v = pieces_[i].w_at(r);
  return v + kTwoPi * double(lift) * r + 2.0 * kPi * kPi * double(lift) * double(lift);
}

double PiecewiseW::phi_after(double x) const {
  long lift;
  int i = piece_after(x, lift);
  double r = x - kTwoPi * double(lift);
  return pieces_[i].phi_at(r) + kTwoPi * double(lift);
}

double PiecewiseW::phi_before(double x) const {
  long lift;
  int i = piece_before(x, lift);
  double r = x - kTwoPi * double(lift);
  return pieces_[i].phi_at(r) + kTwoPi * double(lift);
}

}  // namespace facetflow
