/* C boundary of the optional accelerated text kernel.
 *
 * Everything crosses as flat arrays: token ids are int32, sequence i of a
 * list spans ids[off[i] .. off[i+1]) so an offsets array has count+1
 * entries, seeds are uint64, and results go to caller-owned buffers.
 * The kernel never sees strings; id equality is token equality. */
#ifndef RSUM_FASTKERNEL_ABI_H
#define RSUM_FASTKERNEL_ABI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define RSUM_FK_ABI_VERSION 1u

enum {
  FK_OK = 0,
  FK_ALL_DROPPED = 1,
  FK_EMPTY = 2,
  FK_BAD_ARGUMENT = 3,
  FK_CAPACITY = 4,
  FK_SKIPPED = 5
};

/* Must return RSUM_FK_ABI_VERSION; any other value disables the kernel. */
typedef uint32_t (*fk_abi_version_fn)(void);

/* out[i] = LCS length of a_i and b_i. */
typedef int32_t (*fk_lcs_length_batch_fn)(const int32_t* a, const uint64_t* a_off,
                                          const int32_t* b, const uint64_t* b_off,
                                          uint64_t n_pairs, uint64_t* out);

/* Candidate i is scored against references ref_group_off[i] .. ref_group_off[i+1]
 * of the reference list. n_values[j] >= 1 asks for ROUGE-n, 0 for ROUGE-L.
 * mode 0 keeps the reference with the highest F1 (ties: higher recall, then
 * the earliest); mode 1 the highest recall (ties: higher F1, then earliest).
 * out holds n_items * n_count triples (precision, recall, f1), item-major. */
typedef int32_t (*fk_rouge_batch_fn)(const int32_t* cand, const uint64_t* cand_off,
                                     uint64_t n_items, const int32_t* refs,
                                     const uint64_t* ref_off, const uint64_t* ref_group_off,
                                     const int32_t* n_values, uint64_t n_count, int32_t mode,
                                     double* out);

/* ratios = {shuffle, drop, add}. One xoshiro256** stream seeded with
 * master_seed is consumed item by item in the same order as the reference
 * perturbation. Perturbed bodies go to out_ids (capacity out_capacity ids)
 * with out_off[n_items+1]. out_status[i] is FK_OK or the failure of item i;
 * processing stops at the first failure and later items are FK_SKIPPED.
 * Returns FK_OK or the first failure. */
typedef int32_t (*fk_perturb_batch_fn)(const int32_t* texts, const uint64_t* text_off,
                                       const int32_t* donors, const uint64_t* donor_off,
                                       uint64_t n_items, const double* ratios,
                                       uint64_t master_seed, int32_t* out_ids,
                                       uint64_t out_capacity, uint64_t* out_off,
                                       int32_t* out_status);

#ifdef __cplusplus
}
#endif

#endif
