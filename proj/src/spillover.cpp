#include "sucd/spillover.hpp"

#include <algorithm>
#include <cmath>

#include "sucd/io.hpp"

namespace sucd {

double SpilloverRep::fractional_length() const {
    long exp;
    const double d = mpz_get_d_2exp(&exp, K.get_mpz_t());
    return static_cast<double>(m.size()) + std::log2(d) + static_cast<double>(exp);
}

SpilloverRep merge_leftover(const SpilloverRep& rep, unsigned w) {
    const size_t r = rep.m.size() % w;
    if (r == 0) return rep;
    SpilloverRep out;
    out.m.append_range(rep.m, 0, rep.m.size() - r);
    const mpz_class leftover = rep.m.get_mpz(rep.m.size() - r, r);
    out.k = (rep.k << r) + leftover;
    out.K = rep.K << r;
    return out;
}

SpilloverRep split_leftover(const SpilloverRep& rep, unsigned w, const mpz_class& orig_K,
                            size_t orig_bits) {
    const size_t r = orig_bits % w;
    if (r == 0) return rep;
    if (rep.K != orig_K << r) throw std::invalid_argument("universe mismatch");
    SpilloverRep out;
    out.m.append_range(rep.m, 0, rep.m.size());
    out.m.append_mpz(rep.k & mpz_class((mpz_class(1) << r) - 1), r);
    out.k = rep.k >> r;
    out.K = orig_K;
    return out;
}

SizePartition SizePartition::make(uint64_t n,
                                 const std::vector<std::pair<uint64_t, mpq_class>>& weights) {
    if (weights.empty()) throw std::invalid_argument("empty partition");
    uint64_t lg = 0;
    while ((uint64_t{1} << lg) < n) ++lg;
    SizePartition p;
    p.t_ = 10 * std::max<uint64_t>(1, lg);
    p.total_ = mpz_class(1) << p.t_;

    // Clamp to >= 1/n^3, renormalize.
    mpz_class n3 = mpz_class(n) * n * n;
    if (n3 == 0) n3 = 1;
    std::vector<std::pair<uint64_t, mpq_class>> probs;
    mpq_class sum = 0;
    for (const auto& [s, wt] : weights) {
        if (sgn(wt) < 0) throw std::invalid_argument("negative weight");
        probs.emplace_back(s, wt);
        sum += wt;
    }
    if (sum == 0) throw std::invalid_argument("zero total weight");
    mpq_class floor_p(mpz_class(1));
    floor_p /= mpq_class(n3);
    for (auto& [s, pr] : probs) pr /= sum;
    if (mpq_class(static_cast<unsigned long>(probs.size())) * floor_p > 1)
        throw std::invalid_argument("too many sizes for the probability floor");
    // Pin everything below the floor to exactly 1/n^3 and rescale the rest,
    // repeating until stable, so each final p(s) >= 1/n^3 and the sum is 1.
    std::vector<bool> pinned(probs.size(), false);
    for (bool changed = true; changed;) {
        changed = false;
        mpq_class pinned_mass = 0, free_mass = 0;
        for (size_t i = 0; i < probs.size(); ++i)
            (pinned[i] ? pinned_mass : free_mass) += probs[i].second;
        const mpq_class scale = (1 - pinned_mass) / (free_mass > 0 ? free_mass : mpq_class(1));
        for (size_t i = 0; i < probs.size(); ++i) {
            if (pinned[i]) continue;
            if (probs[i].second * scale < floor_p) {
                probs[i].second = floor_p;
                pinned[i] = true;
                changed = true;
            }
        }
        if (!changed)
            for (size_t i = 0; i < probs.size(); ++i)
                if (!pinned[i]) probs[i].second *= scale;
    }
    for (auto& [s, pr] : probs) pr.canonicalize();

    // Largest-remainder apportionment of 2^t.
    struct Share {
        uint64_t s;
        mpz_class base;
        mpq_class rem;
        mpq_class prob;
    };
    std::vector<Share> shares;
    mpz_class assigned = 0;
    for (const auto& [s, pr] : probs) {
        mpq_class exact = pr * mpq_class(p.total_);
        mpz_class base = exact.get_num() / exact.get_den();
        mpq_class rem = exact - mpq_class(base);
        assigned += base;
        shares.push_back({s, base, rem, pr});
    }
    mpz_class leftover = p.total_ - assigned;
    std::vector<size_t> order(shares.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (shares[a].rem != shares[b].rem) return shares[a].rem > shares[b].rem;
        return shares[a].s < shares[b].s;
    });
    for (size_t i = 0; leftover > 0; i = (i + 1) % order.size(), --leftover)
        shares[order[i]].base += 1;

    std::stable_sort(shares.begin(), shares.end(), [](const Share& a, const Share& b) {
        if (a.base != b.base) return a.base < b.base;
        return a.s < b.s;
    });
    mpz_class at = 0;
    for (const auto& sh : shares) {
        p.sizes_.push_back(sh.s);
        p.width_.push_back(sh.base);
        p.start_.push_back(at);
        p.prob_.push_back(sh.prob);
        at += sh.base;
    }
    if (at != p.total_) throw std::logic_error("apportionment mismatch");
    return p;
}

void SizePartition::serialize(std::ostream& out) const {
    write_u64(out, t_);
    write_u64(out, sizes_.size());
    for (size_t i = 0; i < sizes_.size(); ++i) {
        write_u64(out, sizes_[i]);
        write_mpz(out, width_[i]);
        write_mpz(out, prob_[i].get_num());
        write_mpz(out, prob_[i].get_den());
    }
}

SizePartition SizePartition::deserialize(std::istream& in) {
    SizePartition p;
    p.t_ = read_u64(in);
    if (p.t_ == 0 || p.t_ > 4096) throw BadFormat("bad partition width");
    p.total_ = mpz_class(1) << p.t_;
    const uint64_t count = read_u64(in);
    if (count == 0 || count > (uint64_t{1} << 32)) throw BadFormat("bad partition count");
    mpz_class at = 0;
    mpq_class psum = 0;
    for (uint64_t i = 0; i < count; ++i) {
        p.sizes_.push_back(read_u64(in));
        p.width_.push_back(read_mpz(in));
        const mpz_class num = read_mpz(in), den = read_mpz(in);
        if (den == 0) throw BadFormat("bad partition probability");
        mpq_class pr(num);
        pr /= mpq_class(den);
        p.prob_.push_back(pr);
        psum += pr;
        p.start_.push_back(at);
        at += p.width_.back();
        if (i > 0 && p.width_[i] < p.width_[i - 1]) throw BadFormat("partition widths unsorted");
    }
    if (at != p.total_ || psum != 1) throw BadFormat("inconsistent partition");
    return p;
}

size_t SizePartition::index_of(uint64_t s) const {
    for (size_t i = 0; i < sizes_.size(); ++i)
        if (sizes_[i] == s) return i;
    throw SizeOutOfRange{};
}

std::pair<uint64_t, mpz_class> SizePartition::locate(const mpz_class& first_t) const {
    if (sgn(first_t) < 0 || first_t >= total_) throw std::out_of_range("partition point");
    size_t lo = 0, hi = sizes_.size();
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        if (start_[mid] <= first_t) lo = mid;
        else hi = mid;
    }
    return {sizes_[lo], first_t - start_[lo]};
}

SpilloverRep embed_size(const SpilloverRep& rep, uint64_t s, const SizePartition& part) {
    const uint64_t t = part.t();
    if (rep.m.size() < 2 * t) throw std::invalid_argument("too few bits to embed size");
    const mpz_class& w = part.width(s);
    const mpz_class m0 = rep.m.get_mpz(0, 2 * t);
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), mpz_class(part.total() * part.total()).get_mpz_t(), w.get_mpz_t());
    SpilloverRep out;
    out.m.append_mpz(part.start(s) + m0 % w, t);
    out.m.append_range(rep.m, 2 * t, rep.m.size() - 2 * t);
    out.k = rep.k * q + m0 / w;
    out.K = rep.K * q;
    return out;
}

std::pair<uint64_t, mpz_class> extract_size(const BitVec& m, const SizePartition& part) {
    return part.locate(m.get_mpz(0, part.t()));
}

std::pair<SpilloverRep, uint64_t> unembed_size(const SpilloverRep& rep, const SizePartition& part) {
    const uint64_t t = part.t();
    const auto [s, off] = extract_size(rep.m, part);
    const mpz_class& w = part.width(s);
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), mpz_class(part.total() * part.total()).get_mpz_t(), w.get_mpz_t());
    const mpz_class m0 = (rep.k % q) * w + off;
    if (m0 >= part.total() * part.total()) throw std::invalid_argument("corrupt embedded spill");
    SpilloverRep out;
    out.m.append_mpz(m0, 2 * t);
    out.m.append_range(rep.m, t, rep.m.size() - t);
    out.k = rep.k / q;
    if (rep.K % q != 0) throw std::invalid_argument("corrupt embedded universe");
    out.K = rep.K / q;
    return {out, s};
}

}  // namespace sucd
