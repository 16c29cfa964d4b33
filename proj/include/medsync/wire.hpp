#pragma once

#include "medsync/wire/address.hpp"
#include "medsync/wire/bytes.hpp"
#include "medsync/wire/cipher.hpp"
#include "medsync/wire/crc32.hpp"
#include "medsync/wire/error.hpp"
#include "medsync/wire/frame.hpp"
#include "medsync/wire/frame_dump.hpp"
#include "medsync/wire/header.hpp"
#include "medsync/wire/message_type.hpp"
#include "medsync/wire/payload.hpp"
