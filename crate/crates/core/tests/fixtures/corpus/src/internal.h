#ifndef EVQ_INTERNAL_H
#define EVQ_INTERNAL_H

#include "evq.h"

#define EVQ_ARRAY_SIZE(a) (sizeof(a) / sizeof((a)[0]))

// Increments the active handle count; the loop keeps running while it is non-zero.
static inline void evq_handle_ref(evq_loop_t* loop) {
  loop->active_handles++;
}

static inline void evq_handle_unref(evq_loop_t* loop) {
  if (loop->active_handles > 0)
    loop->active_handles--;
}

#endif
