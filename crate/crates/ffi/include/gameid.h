#ifndef GAMEID_H
#define GAMEID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Inequality family selector for [`gameid_criterion`] and [`gameid_project`].
 */
typedef enum GameidFamily {
  GAMEID_FAMILY_ABJ = 0,
  GAMEID_FAMILY_ABJ_LOWER = 1,
  /**
   * Connected events of every size.
   */
  GAMEID_FAMILY_SHARP = 2,
} GameidFamily;

/**
 * Result codes returned by every function.
 */
typedef enum GameidStatus {
  GAMEID_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not UTF-8.
   */
  GAMEID_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was outside its documented range.
   */
  GAMEID_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The game specification could not be read or parsed.
   */
  GAMEID_STATUS_PARSE = 3,
  /**
   * The optimization did not certify a result.
   */
  GAMEID_STATUS_SOLVER = 4,
  /**
   * The identified set is empty.
   */
  GAMEID_STATUS_INFEASIBLE = 5,
  GAMEID_STATUS_IO = 6,
  /**
   * An internal panic was caught.
   */
  GAMEID_STATUS_PANIC = 7,
} GameidStatus;

/**
 * Opaque table of choice probabilities for one game.
 */
typedef struct GameidCcp GameidCcp;

/**
 * Opaque game specification.
 */
typedef struct GameidGame GameidGame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static version string of the library.
 */
const char *gameid_version(void);

/**
 * Message describing the last failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *gameid_last_error(void);

/**
 * Parse a game specification file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_game` a valid pointer.
 */
enum GameidStatus gameid_game_load(const char *path, struct GameidGame **out_game);

/**
 * Binary entry game with `n_players` firms and one covariate bin per
 * shift, parameterized by entry intercepts followed by competition effects.
 *
 * # Safety
 * `shifts` must point to `n_bins` values and `out_game` must be valid.
 */
enum GameidStatus gameid_game_entry(size_t n_players,
                                    const double *shifts,
                                    size_t n_bins,
                                    struct GameidGame **out_game);

/**
 * Release a game. Null is ignored.
 *
 * # Safety
 * `game` must come from this library and not be used afterwards.
 */
void gameid_game_free(struct GameidGame *game);

/**
 * Dimensions of a game. Any output pointer may be null.
 *
 * # Safety
 * `game` must be a live handle; non-null outputs must be valid.
 */
enum GameidStatus gameid_game_dims(const struct GameidGame *game,
                                   size_t *n_players,
                                   size_t *n_outcomes,
                                   size_t *n_bins,
                                   size_t *n_params);

/**
 * Restrict parameter `k` to `[lower, upper]`; infinities are allowed.
 *
 * # Safety
 * `game` must be a live handle.
 */
enum GameidStatus gameid_game_set_bound(struct GameidGame *game,
                                        size_t k,
                                        double lower,
                                        double upper);

/**
 * Probability that outcome `y` is a Nash equilibrium in bin `x`, an upper
 * bound on its choice probability.
 *
 * # Safety
 * `theta` must point to `n_params` values; `out_value` must be valid.
 */
enum GameidStatus gameid_singleton_likelihood(const struct GameidGame *game,
                                              const double *theta,
                                              size_t n_params,
                                              size_t y,
                                              size_t x,
                                              double *out_value);

/**
 * Probability that some outcome of the event is an equilibrium, for
 * binary games. The event is given as outcome indices.
 *
 * # Safety
 * `theta` must point to `n_params` values, `outcomes` to `n_outcomes`
 * indices, and `out_value` must be valid.
 */
enum GameidStatus gameid_union_likelihood(const struct GameidGame *game,
                                          const double *theta,
                                          size_t n_params,
                                          const size_t *outcomes,
                                          size_t n_outcomes,
                                          size_t x,
                                          double *out_value);

/**
 * Choice probabilities from a dense row-major `n_bins × n_outcomes`
 * array. Each row must sum to one.
 *
 * # Safety
 * `probs` must point to `n_values` values and `out_ccp` must be valid.
 */
enum GameidStatus gameid_ccp_new(const struct GameidGame *game,
                                 const double *probs,
                                 size_t n_values,
                                 struct GameidCcp **out_ccp);

/**
 * Release a choice-probability table. Null is ignored.
 *
 * # Safety
 * `ccp` must come from this library and not be used afterwards.
 */
void gameid_ccp_free(struct GameidCcp *ccp);

/**
 * Maximal moment-inequality residual at θ; θ is in the set when it is
 * at most about 1e-9.
 *
 * # Safety
 * All pointers must be valid; `theta` must hold `n_params` values.
 */
enum GameidStatus gameid_criterion(const struct GameidGame *game,
                                   const struct GameidCcp *ccp,
                                   enum GameidFamily fam,
                                   const double *theta,
                                   size_t n_params,
                                   double *out_value);

/**
 * Projection interval of `direction · θ` over the identified set.
 *
 * # Safety
 * All pointers must be valid; `direction` must hold `n_params` values.
 */
enum GameidStatus gameid_project(const struct GameidGame *game,
                                 const struct GameidCcp *ccp,
                                 enum GameidFamily fam,
                                 const double *direction,
                                 size_t n_params,
                                 double *out_lower,
                                 double *out_upper);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMEID_H */
